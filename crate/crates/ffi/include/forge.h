#ifndef FORGE_H
#define FORGE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum ForgeStatus {
  FORGE_STATUS_OK = 0,
  FORGE_STATUS_NULL_POINTER = 1,
  FORGE_STATUS_INVALID_ARGUMENT = 2,
  FORGE_STATUS_SAMPLE_RATE_MISMATCH = 3,
  FORGE_STATUS_UNREACHABLE_T60 = 4,
  FORGE_STATUS_IMAGE_BUDGET = 5,
  FORGE_STATUS_SWEEP_NOT_FOUND = 6,
  FORGE_STATUS_NO_SIGNAL = 7,
  FORGE_STATUS_INSUFFICIENT_DECAY = 8,
  FORGE_STATUS_IO = 9,
  FORGE_STATUS_BUFFER_TOO_SMALL = 10,
  FORGE_STATUS_PANIC = 11,
} ForgeStatus;

typedef enum ForgeDirectivity {
  FORGE_DIRECTIVITY_OMNIDIRECTIONAL = 0,
  FORGE_DIRECTIVITY_CARDIOID = 1,
  FORGE_DIRECTIVITY_SUBCARDIOID = 2,
  FORGE_DIRECTIVITY_HYPERCARDIOID = 3,
} ForgeDirectivity;

typedef enum ForgeInterpolation {
  FORGE_INTERPOLATION_NONE = 0,
  FORGE_INTERPOLATION_PARABOLIC = 1,
  FORGE_INTERPOLATION_SINC = 2,
} ForgeInterpolation;

typedef enum ForgeT60Method {
  FORGE_T60_METHOD_T20 = 0,
  FORGE_T60_METHOD_T30 = 1,
} ForgeT60Method;

// Opaque impulse response.
typedef struct ForgeIr ForgeIr;

// Opaque multichannel signal.
typedef struct ForgeSignal ForgeSignal;

// Image-method synthesis parameters. Lengths in metres, angles in degrees.
typedef struct ForgeRirParams {
  double room_dimensions[3];
  // Per-wall pressure reflection coefficients, ordered
  // `x=0, x=Lx, y=0, y=Ly, z=0, z=Lz`. Ignored when `t60 > 0`.
  double wall_reflectivity[6];
  // Target reverberation time in seconds; `<= 0` selects `wall_reflectivity`.
  double t60;
  double source_position[3];
  double source_azimuth_deg;
  double source_elevation_deg;
  enum ForgeDirectivity source_directivity;
  double mic_position[3];
  uint32_t sample_rate;
  // Seconds.
  double ir_length;
  // Reflection order limit; negative means every image inside the IR.
  int32_t max_order;
  // Band-limited fractional-delay placement instead of nearest sample.
  bool sinc;
  // Post-synthesis high-pass cutoff; 0 disables it.
  double highpass_hz;
} ForgeRirParams;

// Exponential sine sweep parameters.
typedef struct ForgeSweepParams {
  double f_start;
  double f_end;
  double duration;
  double amplitude;
  double fade_in;
  double fade_out;
} ForgeSweepParams;

typedef struct ForgeTdoa {
  // Seconds; positive when `b` lags `a`.
  double delay;
  double delay_samples;
  double peak_value;
  double confidence;
} ForgeTdoa;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the most recent failure on this thread, or NULL. The pointer
// stays valid until the next failing call on the same thread.
const char *forge_last_error(void);

// Builds a signal from `num_channels * num_frames` interleaved samples.
enum ForgeStatus forge_signal_new(uint32_t sample_rate,
                                  uintptr_t num_channels,
                                  uintptr_t num_frames,
                                  const double *interleaved,
                                  struct ForgeSignal **out);

void forge_signal_free(struct ForgeSignal *signal);

// Sample rate in Hz, or 0 for NULL.
uint32_t forge_signal_sample_rate(const struct ForgeSignal *signal);

uintptr_t forge_signal_num_channels(const struct ForgeSignal *signal);

// Frames per channel.
uintptr_t forge_signal_len(const struct ForgeSignal *signal);

// Copies one channel into `out`, which must hold `forge_signal_len` samples.
enum ForgeStatus forge_signal_copy_channel(const struct ForgeSignal *signal,
                                           uintptr_t channel,
                                           double *out,
                                           uintptr_t capacity);

// Wraps measured samples as an impulse response.
enum ForgeStatus forge_ir_new(uint32_t sample_rate,
                              const double *samples,
                              uintptr_t len,
                              struct ForgeIr **out);

void forge_ir_free(struct ForgeIr *ir);

uint32_t forge_ir_sample_rate(const struct ForgeIr *ir);

uintptr_t forge_ir_len(const struct ForgeIr *ir);

// Index of the direct-path arrival, or -1 when unknown.
int64_t forge_ir_direct_path_index(const struct ForgeIr *ir);

enum ForgeStatus forge_ir_copy_samples(const struct ForgeIr *ir, double *out, uintptr_t capacity);

// Defaults: a 6 x 4.5 x 2.7 m room with T60 0.5 s, omnidirectional source,
// 16 kHz, 0.5 s, automatic order, nearest-sample placement.
struct ForgeRirParams forge_rir_params_default(void);

// Uniform wall reflection coefficient for a target T60.
enum ForgeStatus forge_reflectivity_from_t60(const double (*room_dimensions)[3],
                                             double t60,
                                             double *out_beta);

// Synthesizes a room impulse response with the image method.
enum ForgeStatus forge_rir_synthesize(const struct ForgeRirParams *params, struct ForgeIr **out);

// Convolves every channel of `signal` with `ir`; output length is
// `len + ir_len - 1`.
enum ForgeStatus forge_convolve(const struct ForgeSignal *signal,
                                const struct ForgeIr *ir,
                                struct ForgeSignal **out);

// Adds `noise` to `signal` at `snr_db`, with a seeded random noise offset.
enum ForgeStatus forge_mix_noise(const struct ForgeSignal *signal,
                                 const struct ForgeSignal *noise,
                                 double snr_db,
                                 uint64_t seed,
                                 struct ForgeSignal **out);

// 20 Hz to 20 kHz over 10 s at amplitude 0.5 with 0.5 s fades.
struct ForgeSweepParams forge_sweep_params_default(void);

enum ForgeStatus forge_ess_generate(const struct ForgeSweepParams *params,
                                    uint32_t sample_rate,
                                    struct ForgeSignal **out);

enum ForgeStatus forge_ess_inverse_filter(const struct ForgeSweepParams *params,
                                          uint32_t sample_rate,
                                          struct ForgeSignal **out);

// Recovers an `ir_length`-second impulse response from a mono sweep
// recording, normalized to a unit direct path.
enum ForgeStatus forge_ess_deconvolve(const struct ForgeSignal *recording,
                                      const struct ForgeSweepParams *params,
                                      double ir_length,
                                      struct ForgeIr **out);

// Delay of `b` relative to `a` by GCC-PHAT, searched within `max_delay` seconds.
enum ForgeStatus forge_gcc_phat(const struct ForgeSignal *a,
                                const struct ForgeSignal *b,
                                double max_delay,
                                enum ForgeInterpolation interpolation,
                                struct ForgeTdoa *out);

// Reverberation time in seconds from Schroeder backward integration.
enum ForgeStatus forge_estimate_t60(const struct ForgeIr *ir,
                                    enum ForgeT60Method method,
                                    double *out_seconds);

// Direct-to-reverberant ratio in dB with a direct window of `window_ms`.
enum ForgeStatus forge_direct_to_reverberant_db(const struct ForgeIr *ir,
                                                double window_ms,
                                                double *out_db);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FORGE_H */
