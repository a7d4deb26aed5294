use std::ffi::CStr;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use forge_ffi::*;

fn signal(fs: u32, channels: usize, interleaved: &[f64]) -> *mut ForgeSignal {
    let mut out = ptr::null_mut();
    let status = unsafe { forge_signal_new(fs, channels, interleaved.len() / channels, interleaved.as_ptr(), &mut out) };
    assert_eq!(status, ForgeStatus::Ok);
    out
}

fn channel(s: *const ForgeSignal, c: usize) -> Vec<f64> {
    unsafe {
        let mut buf = vec![0.0; forge_signal_len(s)];
        assert_eq!(forge_signal_copy_channel(s, c, buf.as_mut_ptr(), buf.len()), ForgeStatus::Ok);
        buf
    }
}

fn ir_samples(h: *const ForgeIr) -> Vec<f64> {
    unsafe {
        let mut buf = vec![0.0; forge_ir_len(h)];
        assert_eq!(forge_ir_copy_samples(h, buf.as_mut_ptr(), buf.len()), ForgeStatus::Ok);
        buf
    }
}

fn last_error() -> String {
    unsafe { CStr::from_ptr(forge_last_error()).to_string_lossy().into_owned() }
}

fn noise(n: usize, mut state: u64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

#[test]
fn signal_handles_deinterleave() {
    let s = signal(16_000, 2, &[1.0, -1.0, 2.0, -2.0, 3.0, -3.0]);
    unsafe {
        assert_eq!(forge_signal_sample_rate(s), 16_000);
        assert_eq!(forge_signal_num_channels(s), 2);
        assert_eq!(forge_signal_len(s), 3);
        assert_eq!(channel(s, 1), vec![-1.0, -2.0, -3.0]);
        let mut small = [0.0; 2];
        assert_eq!(
            forge_signal_copy_channel(s, 0, small.as_mut_ptr(), small.len()),
            ForgeStatus::BufferTooSmall
        );
        assert_eq!(
            forge_signal_copy_channel(s, 2, small.as_mut_ptr(), 3),
            ForgeStatus::InvalidArgument
        );
        forge_signal_free(s);
    }
}

#[test]
fn null_arguments_are_reported() {
    unsafe {
        let mut out = ptr::null_mut();
        assert_eq!(forge_convolve(ptr::null(), ptr::null(), &mut out), ForgeStatus::NullPointer);
        assert!(out.is_null());
        assert!(last_error().contains("NULL"));
        assert_eq!(forge_signal_len(ptr::null()), 0);
        assert_eq!(forge_ir_direct_path_index(ptr::null()), -1);
        forge_signal_free(ptr::null_mut());
        forge_ir_free(ptr::null_mut());
    }
}

#[test]
fn error_codes_follow_the_failure() {
    unsafe {
        let mut beta = 0.0;
        let dims = [5.0, 4.0, 3.0];
        assert_eq!(forge_reflectivity_from_t60(&dims, 0.5, &mut beta), ForgeStatus::Ok);
        assert!((beta - 0.9023).abs() < 1e-4);
        assert_eq!(forge_reflectivity_from_t60(&dims, 1e-4, &mut beta), ForgeStatus::UnreachableT60);
        assert!(last_error().contains("T60"));

        let a = signal(16_000, 1, &noise(1000, 1));
        let b = signal(48_000, 1, &noise(1000, 2));
        let mut est = ForgeTdoa::default();
        assert_eq!(
            forge_gcc_phat(a, b, 0.001, ForgeInterpolation::None, &mut est),
            ForgeStatus::SampleRateMismatch
        );
        let silent = signal(16_000, 1, &[0.0; 4000]);
        let mut out = ptr::null_mut();
        let params = forge_sweep_params_default();
        assert_eq!(forge_ess_deconvolve(silent, &params, 0.1, &mut out), ForgeStatus::InvalidArgument);
        forge_signal_free(a);
        forge_signal_free(b);
        forge_signal_free(silent);
    }
}

#[test]
fn synthesized_rir_through_convolution_and_metrics() {
    unsafe {
        let mut p = forge_rir_params_default();
        p.t60 = 0.4;
        let mut h = ptr::null_mut();
        assert_eq!(forge_rir_synthesize(&p, &mut h), ForgeStatus::Ok);
        let d = forge_ir_direct_path_index(h);
        let dist = p
            .source_position
            .iter()
            .zip(&p.mic_position)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        assert_eq!(d, (dist / 343.0 * 16_000.0).round() as i64);
        let mut t60 = 0.0;
        assert_eq!(forge_estimate_t60(h, ForgeT60Method::T20, &mut t60), ForgeStatus::Ok);
        assert!(t60 > 0.2 && t60 < 1.0, "{t60}");
        let mut drr = 0.0;
        assert_eq!(forge_direct_to_reverberant_db(h, 2.5, &mut drr), ForgeStatus::Ok);
        assert!(drr.is_finite());

        let x = signal(16_000, 1, &[1.0, 0.0, 0.0, 0.0]);
        let mut y = ptr::null_mut();
        assert_eq!(forge_convolve(x, h, &mut y), ForgeStatus::Ok);
        let hs = ir_samples(h);
        assert_eq!(channel(y, 0)[..hs.len()], hs[..]);

        let n = signal(16_000, 1, &noise(8000, 7));
        let mut mixed = ptr::null_mut();
        assert_eq!(forge_mix_noise(y, n, 10.0, 3, &mut mixed), ForgeStatus::Ok);
        assert_eq!(forge_signal_len(mixed), forge_signal_len(y));
        for s in [x, y, n, mixed] {
            forge_signal_free(s);
        }
        forge_ir_free(h);
    }
}

#[test]
fn sweep_round_trip_recovers_delay() {
    unsafe {
        let mut params = forge_sweep_params_default();
        params.duration = 2.0;
        params.f_end = 7000.0;
        let mut sweep = ptr::null_mut();
        assert_eq!(forge_ess_generate(&params, 16_000, &mut sweep), ForgeStatus::Ok);
        let mut inverse = ptr::null_mut();
        assert_eq!(forge_ess_inverse_filter(&params, 16_000, &mut inverse), ForgeStatus::Ok);
        assert_eq!(forge_signal_len(inverse), forge_signal_len(sweep));

        let mut rec = vec![0.0; 40];
        rec.extend(channel(sweep, 0));
        let recording = signal(16_000, 1, &rec);
        let mut h = ptr::null_mut();
        assert_eq!(forge_ess_deconvolve(recording, &params, 0.05, &mut h), ForgeStatus::Ok);
        let samples = ir_samples(h);
        let d = forge_ir_direct_path_index(h) as usize;
        assert!((samples[d] - 1.0).abs() < 1e-9);
        for s in [sweep, inverse, recording] {
            forge_signal_free(s);
        }
        forge_ir_free(h);
    }
}

#[test]
fn gcc_phat_sign_convention() {
    let x = noise(4000, 11);
    let mut late = vec![0.0; 7];
    late.extend_from_slice(&x[..x.len() - 7]);
    let a = signal(16_000, 1, &x);
    let b = signal(16_000, 1, &late);
    let mut est = ForgeTdoa::default();
    unsafe {
        assert_eq!(forge_gcc_phat(a, b, 0.002, ForgeInterpolation::None, &mut est), ForgeStatus::Ok);
        forge_signal_free(a);
        forge_signal_free(b);
    }
    assert_eq!(est.delay_samples, 7.0);
    assert!(est.peak_value > 0.0 && est.peak_value <= 1.0);
}

/// The static library next to the test binary (target/<profile>/deps) or
/// one level up.
fn static_library() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    let deps = exe.parent().unwrap();
    [deps, deps.parent().unwrap()]
        .iter()
        .map(|d| d.join("libforge_ffi.a"))
        .find(|p| p.exists())
        .expect("libforge_ffi.a not built")
}

#[test]
fn header_compiles_and_links_from_c() {
    let header_dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let header = std::fs::read_to_string(header_dir.join("forge.h")).unwrap();
    for symbol in ["forge_rir_synthesize", "forge_last_error", "FORGE_STATUS_OK", "typedef struct ForgeSignal"] {
        assert!(header.contains(symbol), "{symbol} missing from header");
    }
    let lib = static_library();

    let dir = tempfile_dir();
    let src = dir.join("main.c");
    std::fs::write(
        &src,
        r#"#include "forge.h"
#include <stdio.h>
int main(void) {
    double dims[3] = {5.0, 4.0, 3.0};
    double beta = 0.0;
    if (forge_reflectivity_from_t60(&dims, 0.5, &beta) != FORGE_STATUS_OK) return 1;
    ForgeRirParams p = forge_rir_params_default();
    ForgeIr *ir = NULL;
    if (forge_rir_synthesize(&p, &ir) != FORGE_STATUS_OK) return 2;
    if (forge_ir_direct_path_index(ir) < 0) return 3;
    forge_ir_free(ir);
    p.room_dimensions[0] = -1.0;
    if (forge_rir_synthesize(&p, &ir) != FORGE_STATUS_INVALID_ARGUMENT) return 4;
    printf("%.4f %s\n", beta, forge_last_error() ? "error-set" : "no-error");
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.join("capi_smoke");
    let cc = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .output()
        .expect("C compiler");
    assert!(cc.status.success(), "{}", String::from_utf8_lossy(&cc.stderr));
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status);
    assert_eq!(String::from_utf8_lossy(&run.stdout).trim(), "0.9023 error-set");
    std::fs::remove_dir_all(dir).unwrap();
}

fn tempfile_dir() -> PathBuf {
    let dir = std::env::temp_dir().join(format!("forge-ffi-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
