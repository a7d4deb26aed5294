use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use forge_core::array::{delay_and_sum, oracle_select_table, steer_and_sum_with, Interpolation, ShiftMethod, SteeringOptions};
use forge_core::audio::{read_ir, read_wav, write_ir, write_json, write_wav, SampleFormat};
use forge_core::contaminate::{run_job_detailed, ContaminationJob, NoiseSpec, Normalization, SnrReference};
use forge_core::corpus::{plan_and_run, summarize, IrCache};
use forge_core::ess::{deconvolve_ir_with, generate_ess, inverse_filter, DeconvolveConfig, SweepSpec};
use forge_core::manifest::load_manifest;
use forge_core::metrics::{compare_irs, direct_to_reverberant_db, estimate_t60, schroeder_curve, T60Method};
use forge_core::rir::{synthesize_rir_with_info, FractionalDelay, ImageSynthesisConfig, MaxOrder};
use forge_core::{
    Directivity, Error, MicSpec, Orientation, Result, RoomSpec, SourceSpec, Vec3, WallReflectivity,
};

const EXIT_FAILURE: u8 = 1;
const EXIT_INVALID: u8 = 2;

#[derive(Parser)]
#[command(name = "forge", version, about = "Simulated distant-speech corpus generation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a corpus from a scenario manifest.
    Run(RunArgs),
    /// Synthesize one room impulse response with the image method.
    Rir(RirArgs),
    /// Exponential sine sweep tools.
    #[command(subcommand)]
    Sweep(SweepCommand),
    /// Convolve clean speech with IRs and add noise.
    Contaminate(ContaminateArgs),
    /// Delay-and-sum a multichannel recording.
    Beamform(BeamformArgs),
    /// Decay curve, T60 and DRR of an impulse response.
    Metrics(MetricsArgs),
    /// Oracle channel selection from a score table.
    Select(SelectArgs),
}

#[derive(Args)]
struct RunArgs {
    manifest: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = default_jobs())]
    jobs: usize,
    /// Override the manifest seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Validate and print the job plan without rendering.
    #[arg(long)]
    dry_run: bool,
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

#[derive(Args)]
struct RirArgs {
    /// Room size in meters.
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], required = true)]
    room: Vec<f64>,
    /// Target reverberation time, seconds.
    #[arg(long, conflicts_with = "beta")]
    t60: Option<f64>,
    /// Uniform wall reflection coefficient.
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], required = true, allow_hyphen_values = true)]
    source: Vec<f64>,
    #[arg(long, num_args = 3, value_names = ["X", "Y", "Z"], required = true, allow_hyphen_values = true)]
    mic: Vec<f64>,
    /// Source azimuth, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    azimuth: f64,
    /// Source elevation, degrees.
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    elevation: f64,
    #[arg(long, default_value = "omnidirectional")]
    directivity: Directivity,
    #[arg(long, default_value_t = 16_000)]
    sample_rate: u32,
    /// IR length, seconds.
    #[arg(long, default_value_t = 0.5)]
    length: f64,
    /// Reflection order limit (default: everything inside the IR length).
    #[arg(long)]
    max_order: Option<u32>,
    /// Fractional-delay (windowed sinc) placement of arrivals.
    #[arg(long)]
    sinc: bool,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args, Clone)]
struct SweepParams {
    #[arg(long, default_value_t = 20.0)]
    f_start: f64,
    #[arg(long, default_value_t = 20_000.0)]
    f_end: f64,
    /// Seconds.
    #[arg(long, default_value_t = 10.0)]
    duration: f64,
    #[arg(long, default_value_t = 0.5)]
    amplitude: f64,
    #[arg(long, default_value_t = 0.5)]
    fade_in: f64,
    #[arg(long, default_value_t = 0.5)]
    fade_out: f64,
    #[arg(long, default_value_t = 48_000)]
    sample_rate: u32,
}

impl SweepParams {
    fn spec(&self) -> SweepSpec {
        SweepSpec {
            f_start: self.f_start,
            f_end: self.f_end,
            duration: self.duration,
            amplitude: self.amplitude,
            fade_in: self.fade_in,
            fade_out: self.fade_out,
        }
    }
}

#[derive(Subcommand)]
enum SweepCommand {
    /// Write the excitation sweep.
    Gen {
        #[command(flatten)]
        params: SweepParams,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Write the inverse filter.
    Invert {
        #[command(flatten)]
        params: SweepParams,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Recover an impulse response from a recorded sweep.
    Deconv {
        recording: PathBuf,
        #[command(flatten)]
        params: SweepParams,
        /// IR length, seconds.
        #[arg(long, default_value_t = 1.0)]
        ir_length: f64,
        #[arg(short, long)]
        output: PathBuf,
    },
}

#[derive(Args)]
struct ContaminateArgs {
    clean: PathBuf,
    /// Impulse response per output channel.
    #[arg(long = "ir", required = true)]
    irs: Vec<PathBuf>,
    #[arg(long, requires = "snr")]
    noise: Option<PathBuf>,
    /// Target SNR, dB.
    #[arg(long, allow_hyphen_values = true)]
    snr: Option<f64>,
    /// Measure SNR over active speech frames only.
    #[arg(long)]
    active_speech: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale the output so its peak sits at -1 dBFS.
    #[arg(long)]
    normalize: bool,
    #[arg(long, default_value = "pcm16")]
    format: SampleFormat,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct BeamformArgs {
    input: PathBuf,
    /// Text file with one delay in seconds per channel; estimated with
    /// GCC-PHAT when omitted.
    #[arg(long)]
    delays: Option<PathBuf>,
    /// Reference channel for delay estimation.
    #[arg(long, default_value_t = 0)]
    reference: usize,
    /// Delay search bound, milliseconds.
    #[arg(long, default_value_t = 10.0)]
    max_delay_ms: f64,
    /// Fractional delays with windowed-sinc shifts.
    #[arg(long)]
    sinc: bool,
    /// Write steering diagnostics as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long, default_value = "pcm16")]
    format: SampleFormat,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Args)]
struct MetricsArgs {
    ir: PathBuf,
    #[arg(long, default_value = "t20")]
    method: T60Method,
    #[arg(long, default_value_t = 2.5)]
    drr_window_ms: f64,
    /// Write the decay curve as CSV (time_s, level_db).
    #[arg(long)]
    decay_csv: Option<PathBuf>,
    /// Second IR to compare against.
    #[arg(long)]
    compare: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// CSV with columns utterance_id, channel_id, score (lower is better).
    scores: PathBuf,
    /// Output CSV; standard output when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

fn vec3(v: &[f64]) -> Vec3 {
    Vec3::new(v[0], v[1], v[2])
}

fn rir(args: RirArgs) -> Result<()> {
    let reflectivity = match (args.t60, args.beta) {
        (Some(t), _) => WallReflectivity::T60(t),
        (None, Some(b)) => WallReflectivity::Coefficients([b; 6]),
        (None, None) => return Err(Error::validation("room", "give --t60 or --beta")),
    };
    let room = RoomSpec::new(vec3(&args.room), reflectivity)?;
    let source = SourceSpec::new(
        vec3(&args.source),
        Orientation::from_degrees(args.azimuth, args.elevation),
        args.directivity,
    )?;
    let mic = MicSpec::new("mic", vec3(&args.mic));
    let config = ImageSynthesisConfig {
        sample_rate: args.sample_rate,
        max_order: args.max_order.map_or(MaxOrder::Auto, MaxOrder::Fixed),
        ir_length: args.length,
        fractional_delay: if args.sinc { FractionalDelay::Sinc } else { FractionalDelay::NearestSample },
        ..ImageSynthesisConfig::default()
    };
    let (ir, info) = synthesize_rir_with_info(&room, &source, &mic, &config)?;
    let details = serde_json::json!({
        "room": room,
        "source": source,
        "mic": mic.position,
        "config": config,
        "image_count": info.image_count,
        "effective_max_order": info.effective_max_order,
        "wall_coefficients": info.wall_coefficients,
    });
    write_ir(&args.output, &ir, details)
}

fn sweep(cmd: SweepCommand) -> Result<()> {
    match cmd {
        SweepCommand::Gen { params, output } => {
            let s = generate_ess(&params.spec(), params.sample_rate)?;
            write_wav(&output, &s, SampleFormat::Float32)
        }
        SweepCommand::Invert { params, output } => {
            let s = inverse_filter(&params.spec(), params.sample_rate)?;
            write_wav(&output, &s, SampleFormat::Float32)
        }
        SweepCommand::Deconv {
            recording,
            params,
            ir_length,
            output,
        } => {
            let rec = read_wav(&recording)?;
            let (ir, info) = deconvolve_ir_with(&rec, &params.spec(), &DeconvolveConfig::new(ir_length))?;
            let details = serde_json::json!({ "sweep": params.spec(), "deconvolution": info });
            write_ir(&output, &ir, details)
        }
    }
}

fn contaminate(args: ContaminateArgs) -> Result<()> {
    let clean = read_wav(&args.clean)?;
    let irs = args.irs.iter().map(|p| read_ir(p).map(Arc::new)).collect::<Result<Vec<_>>>()?;
    let noise = match (&args.noise, args.snr) {
        (Some(path), Some(snr)) => Some(NoiseSpec {
            signal: Arc::new(read_wav(path)?),
            target_snr_db: snr,
            reference: if args.active_speech { SnrReference::ActiveSpeech } else { SnrReference::FullUtterance },
            per_channel_offsets: false,
        }),
        _ => None,
    };
    let job = ContaminationJob {
        clean: Arc::new(clean),
        irs,
        noise,
        seed: args.seed,
        normalization: if args.normalize { Normalization::Peak } else { Normalization::None },
    };
    let out = run_job_detailed(&job)?;
    out.signal.require_pipeline_rate()?;
    write_wav(&args.output, &out.signal, args.format)
}

fn read_delays(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| Error::validation("delays file", format!("{t:?} is not a number")))
        })
        .collect()
}

fn beamform(args: BeamformArgs) -> Result<()> {
    let input = read_wav(&args.input)?;
    let shift = if args.sinc { ShiftMethod::Sinc } else { ShiftMethod::Integer };
    let out = match &args.delays {
        Some(path) => delay_and_sum(&input, &read_delays(path)?, shift)?,
        None => {
            let opts = SteeringOptions {
                reference: args.reference,
                max_delay: args.max_delay_ms * 1e-3,
                interpolation: if args.sinc { Interpolation::Sinc } else { Interpolation::None },
                shift,
            };
            let (out, report) = steer_and_sum_with(&input, &opts)?;
            for ch in &report.low_confidence {
                eprintln!("warning: low-confidence delay estimate for channel {ch}");
            }
            if let Some(path) = &args.report {
                write_json(path, &report)?;
            }
            out
        }
    };
    write_wav(&args.output, &out, args.format)
}

#[derive(Serialize)]
struct MetricsReport {
    sample_rate: u32,
    length: usize,
    direct_path_index: usize,
    method: T60Method,
    t60: Option<f64>,
    t60_error: Option<String>,
    drr_db: Option<f64>,
    decay_range_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    comparison: Option<forge_core::metrics::IrComparison>,
}

fn metrics(args: MetricsArgs) -> Result<()> {
    let ir = read_ir(&args.ir)?;
    let curve = schroeder_curve(&ir)?;
    let (t60, t60_error) = match estimate_t60(&ir, args.method) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let comparison = match &args.compare {
        Some(p) => Some(compare_irs(&ir, &read_ir(p)?)?),
        None => None,
    };
    let report = MetricsReport {
        sample_rate: ir.sample_rate(),
        length: ir.len(),
        direct_path_index: ir.direct_path_or_peak(),
        method: args.method,
        t60,
        t60_error,
        drr_db: direct_to_reverberant_db(&ir, args.drr_window_ms).ok(),
        decay_range_db: curve.min_level_db(),
        comparison,
    };
    if let Some(path) = &args.decay_csv {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(["time_s", "level_db"])?;
        for (t, l) in curve.times().zip(&curve.level_db) {
            w.write_record([t.to_string(), l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    println!("{}", serde_json::to_string_pretty(&report).expect("report serializes"));
    Ok(())
}

#[derive(Deserialize)]
struct ScoreRow {
    utterance_id: String,
    channel_id: String,
    score: f64,
}

fn select(args: SelectArgs) -> Result<()> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(&args.scores)?;
    let rows: Vec<ScoreRow> = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    let selection = oracle_select_table(rows.iter().map(|r| (r.utterance_id.as_str(), r.channel_id.as_str(), r.score)))?;
    let sink: Box<dyn std::io::Write> = match &args.output {
        Some(p) => Box::new(std::fs::File::create(p).map_err(|e| Error::io(p, e))?),
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["utterance_id", "channel_id", "score"])?;
    for (utt, sel) in &selection {
        w.write_record([utt.as_str(), sel.channel.as_str(), &sel.score.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(args.output.unwrap_or_else(|| PathBuf::from("-")), e))?;
    Ok(())
}

fn run(args: RunArgs) -> ExitCode {
    let mut manifest = match load_manifest(&args.manifest) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_INVALID);
        }
    };
    if let Some(seed) = args.seed {
        manifest.seed = seed;
    }
    if args.dry_run {
        println!("{}", serde_json::to_string_pretty(&summarize(&manifest)).expect("summary serializes"));
        return ExitCode::SUCCESS;
    }
    let cache = IrCache::from_env();
    match plan_and_run(&manifest, args.jobs, &cache) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            for f in &report.failures {
                eprintln!("failed: {}/{}: {}", f.session, f.sentence, f.error);
            }
            println!(
                "{} of {} utterances rendered, {} files, {:.3} h of audio",
                report.jobs_succeeded, report.jobs_planned, report.files_written, report.total_audio_hours
            );
            if report.success() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(EXIT_FAILURE)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => return run(args),
        Command::Rir(args) => rir(args),
        Command::Sweep(cmd) => sweep(cmd),
        Command::Contaminate(args) => contaminate(args),
        Command::Beamform(args) => beamform(args),
        Command::Metrics(args) => metrics(args),
        Command::Select(args) => select(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FAILURE)
        }
    }
}
