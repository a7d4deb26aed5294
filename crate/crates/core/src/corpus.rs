//! Batch corpus generation from a validated manifest.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::acoustics::MicSpec;
use crate::audio::{read_ir, read_wav, write_json, write_wav};
use crate::contaminate::{run_job_detailed, validate_clean, ContaminationJob, NoiseSpec, QualityReport};
use crate::error::{Error, Result};
use crate::manifest::{IrPlan, JobRef, ScenarioManifest, Session};
use crate::rir::{synthesize_rir, wall_coefficients};
use crate::signal::{AudioSignal, ImpulseResponse};

/// Environment variable naming a directory for persisted synthesized IRs.
pub const CACHE_DIR_ENV: &str = "FORGE_CACHE_DIR";

const CACHE_MAGIC: &[u8; 8] = b"FORGEIR1";

type Slot = Arc<OnceLock<std::result::Result<Arc<ImpulseResponse>, Arc<Error>>>>;

/// Concurrent IR store. Each key is computed once; later and concurrent
/// requests share the result. With a directory set, synthesized IRs are
/// also persisted as raw little-endian `f64` so reloads are bit-identical.
#[derive(Debug, Default)]
pub struct IrCache {
    dir: Option<PathBuf>,
    slots: Mutex<HashMap<String, Slot>>,
}

impl IrCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        IrCache {
            dir,
            slots: Mutex::default(),
        }
    }

    pub fn from_env() -> Self {
        IrCache::new(std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from))
    }

    pub fn get_or_insert_with(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<ImpulseResponse>,
    ) -> Result<Arc<ImpulseResponse>> {
        self.lookup(key, true, compute)
    }

    /// Like [`IrCache::get_or_insert_with`] but never touches the disk.
    pub fn get_or_insert_in_memory(
        &self,
        key: &str,
        compute: impl FnOnce() -> Result<ImpulseResponse>,
    ) -> Result<Arc<ImpulseResponse>> {
        self.lookup(key, false, compute)
    }

    fn lookup(
        &self,
        key: &str,
        persist: bool,
        compute: impl FnOnce() -> Result<ImpulseResponse>,
    ) -> Result<Arc<ImpulseResponse>> {
        let slot = {
            let mut slots = self.slots.lock().expect("cache lock poisoned");
            slots.entry(key.to_string()).or_default().clone()
        };
        slot.get_or_init(|| {
            if persist {
                if let Some(ir) = self.load(key) {
                    return Ok(Arc::new(ir));
                }
            }
            let ir = compute().map_err(Arc::new)?;
            if persist {
                self.store(key, &ir);
            }
            Ok(Arc::new(ir))
        })
        .clone()
        .map_err(Error::Shared)
    }

    pub fn len(&self) -> usize {
        self.slots.lock().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn file(&self, key: &str) -> Option<PathBuf> {
        self.dir.as_ref().map(|d| d.join(format!("{key}.ir")))
    }

    fn load(&self, key: &str) -> Option<ImpulseResponse> {
        let bytes = fs::read(self.file(key)?).ok()?;
        decode_ir(&bytes)
    }

    /// Best effort: a failed write only costs a later resynthesis.
    fn store(&self, key: &str, ir: &ImpulseResponse) {
        let (Some(dir), Some(path)) = (&self.dir, self.file(key)) else {
            return;
        };
        if fs::create_dir_all(dir).is_err() {
            return;
        }
        let tmp = path.with_extension(format!("tmp{}", std::process::id()));
        if fs::write(&tmp, encode_ir(ir)).is_ok() {
            let _ = fs::rename(&tmp, &path);
        }
    }
}

fn encode_ir(ir: &ImpulseResponse) -> Vec<u8> {
    let mut out = Vec::with_capacity(28 + 8 * ir.len());
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&ir.sample_rate().to_le_bytes());
    let direct = ir.direct_path_index().map_or(u64::MAX, |d| d as u64);
    out.extend_from_slice(&direct.to_le_bytes());
    out.extend_from_slice(&(ir.len() as u64).to_le_bytes());
    for v in ir.samples() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

fn decode_ir(bytes: &[u8]) -> Option<ImpulseResponse> {
    let rest = bytes.strip_prefix(CACHE_MAGIC)?;
    let fs = u32::from_le_bytes(rest.get(..4)?.try_into().ok()?);
    let direct = u64::from_le_bytes(rest.get(4..12)?.try_into().ok()?);
    let len = u64::from_le_bytes(rest.get(12..20)?.try_into().ok()?) as usize;
    let data = rest.get(20..)?;
    if data.len() != len * 8 {
        return None;
    }
    let samples = data
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    let ir = ImpulseResponse::new(fs, samples, crate::Provenance::ImageMethod).ok()?;
    if direct == u64::MAX {
        Some(ir)
    } else {
        ir.with_direct_path(direct as usize).ok()
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Cache key of a synthesized IR: a digest of everything it depends on.
pub fn synthesis_key(manifest: &ScenarioManifest, session: &Session, mic: &MicSpec) -> String {
    let desc = json!({
        "v": 1,
        "room": manifest.rooms[&session.room],
        "source": session.source,
        "mic": mic.position,
        "config": manifest.synthesis,
    });
    hex(&Sha256::digest(desc.to_string().as_bytes()))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JobFailure {
    pub session: String,
    pub sentence: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UtteranceRecord {
    pub session: String,
    pub sentence: String,
    pub seed: u64,
    pub duration_s: f64,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusReport {
    pub seed: u64,
    pub sample_rate: u32,
    pub jobs_planned: usize,
    pub jobs_succeeded: usize,
    pub jobs_failed: usize,
    pub files_written: usize,
    pub total_audio_hours: f64,
    pub warnings: Vec<String>,
    pub failures: Vec<JobFailure>,
    pub utterances: Vec<UtteranceRecord>,
}

impl CorpusReport {
    pub fn success(&self) -> bool {
        self.jobs_failed == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlanSummary {
    pub sessions: usize,
    pub jobs: usize,
    pub channels_per_session: Vec<usize>,
    pub output_files: usize,
}

pub fn summarize(manifest: &ScenarioManifest) -> PlanSummary {
    let jobs = manifest.jobs();
    let channels_per_session: Vec<usize> = manifest.sessions.iter().map(|s| s.mics.len()).collect();
    let output_files = jobs.iter().map(|j| manifest.sessions[j.session].mics.len()).sum();
    PlanSummary {
        sessions: manifest.sessions.len(),
        jobs: jobs.len(),
        channels_per_session,
        output_files,
    }
}

struct RunContext<'a> {
    manifest: &'a ScenarioManifest,
    cache: &'a IrCache,
    noise: Option<Arc<AudioSignal>>,
}

/// Renders every job with `workers` threads and writes `corpus.json`.
pub fn plan_and_run(manifest: &ScenarioManifest, workers: usize, cache: &IrCache) -> Result<CorpusReport> {
    let jobs = manifest.jobs();
    let mut warnings = Vec::new();
    if manifest.sessions.is_empty() {
        warnings.push("manifest has no sessions; corpus is empty".to_string());
    }
    fs::create_dir_all(&manifest.output_dir).map_err(|e| Error::io(&manifest.output_dir, e))?;
    let noise = match &manifest.noise {
        Some(cfg) => {
            let signal = read_wav(&cfg.file)?;
            if signal.sample_rate() != manifest.sample_rate {
                return Err(Error::SampleRateMismatch {
                    left: manifest.sample_rate,
                    right: signal.sample_rate(),
                });
            }
            Some(Arc::new(signal))
        }
        None => None,
    };
    let ctx = RunContext {
        manifest,
        cache,
        noise,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::validation("worker pool", e.to_string()))?;
    let results: Vec<Result<UtteranceRecord>> = pool.install(|| jobs.par_iter().map(|&j| run_one(&ctx, j)).collect());

    let mut report = CorpusReport {
        seed: manifest.seed,
        sample_rate: manifest.sample_rate,
        jobs_planned: jobs.len(),
        jobs_succeeded: 0,
        jobs_failed: 0,
        files_written: 0,
        total_audio_hours: 0.0,
        warnings,
        failures: Vec::new(),
        utterances: Vec::new(),
    };
    let mut seconds = 0.0;
    for (job, result) in jobs.iter().zip(results) {
        let session = &manifest.sessions[job.session];
        match result {
            Ok(rec) => {
                report.jobs_succeeded += 1;
                report.files_written += rec.files.len();
                seconds += rec.duration_s * rec.files.len() as f64;
                report.utterances.push(rec);
            }
            Err(e) => {
                report.jobs_failed += 1;
                report.failures.push(JobFailure {
                    session: session.name.clone(),
                    sentence: session.sentences[job.sentence].id.clone(),
                    error: e.to_string(),
                });
            }
        }
    }
    report.total_audio_hours = seconds / 3600.0;
    write_json(&manifest.output_dir.join("corpus.json"), &report)?;
    Ok(report)
}

fn session_irs(ctx: &RunContext, session: &Session) -> Result<Vec<(Arc<ImpulseResponse>, serde_json::Value)>> {
    let m = ctx.manifest;
    let room = &m.rooms[&session.room];
    session
        .mics
        .iter()
        .map(|mic| match &session.ir {
            IrPlan::Synthesize => {
                let key = synthesis_key(m, session, mic);
                let ir = ctx
                    .cache
                    .get_or_insert_with(&key, || synthesize_rir(room, &session.source, mic, &m.synthesis))?;
                Ok((ir, json!({ "origin": "image-method", "cache_key": key })))
            }
            IrPlan::Files(files) => {
                let path = &files[&mic.id];
                let key = format!("file-{}", hex(&Sha256::digest(path.to_string_lossy().as_bytes())));
                let ir = ctx.cache.get_or_insert_in_memory(&key, || read_ir(path))?;
                if ir.sample_rate() != m.sample_rate {
                    return Err(Error::SampleRateMismatch {
                        left: m.sample_rate,
                        right: ir.sample_rate(),
                    });
                }
                let name = path.file_name().map(|n| n.to_string_lossy().into_owned());
                Ok((ir, json!({ "origin": "file", "file": name })))
            }
        })
        .collect()
}

fn run_one(ctx: &RunContext, job: JobRef) -> Result<UtteranceRecord> {
    let m = ctx.manifest;
    let session = &m.sessions[job.session];
    let sentence = &session.sentences[job.sentence];
    let seed = m.job_seed(job);

    let clean = read_wav(&sentence.file)?;
    if clean.sample_rate() != m.sample_rate {
        return Err(Error::SampleRateMismatch {
            left: m.sample_rate,
            right: clean.sample_rate(),
        });
    }
    let quality: Option<QualityReport> = match m.clean_min_snr_db {
        Some(min) => {
            let q = validate_clean(&clean, min)?;
            if !q.passed {
                return Err(Error::validation(
                    "clean signal",
                    format!(
                        "quality check failed (estimated SNR {:?} dB, clipping {})",
                        q.estimated_snr_db, q.clipping
                    ),
                ));
            }
            Some(q)
        }
        None => None,
    };

    let irs = session_irs(ctx, session)?;
    let cjob = ContaminationJob {
        clean: Arc::new(clean),
        irs: irs.iter().map(|(ir, _)| ir.clone()).collect(),
        noise: match (&m.noise, &ctx.noise) {
            (Some(cfg), Some(signal)) => Some(NoiseSpec {
                signal: signal.clone(),
                target_snr_db: cfg.snr_db,
                reference: cfg.reference,
                per_channel_offsets: cfg.per_channel_offsets,
            }),
            _ => None,
        },
        seed,
        normalization: m.output.normalization,
    };
    let out = run_job_detailed(&cjob)?;

    let dir = m.output_dir.join(&session.name);
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let room = &m.rooms[&session.room];
    let names = session.channel_names(m.output.channel_naming);
    let mut staged: Vec<(PathBuf, PathBuf)> = Vec::new();
    let mut files = Vec::new();
    let write = |staged: &mut Vec<(PathBuf, PathBuf)>| -> Result<()> {
        for (ch, name) in names.iter().enumerate() {
            let stem = format!("{}_{}", sentence.id, name);
            let wav = dir.join(format!("{stem}.wav"));
            let side = dir.join(format!("{stem}.json"));
            let signal = AudioSignal::mono(m.sample_rate, out.signal.channel(ch).to_vec())?;
            let (ir, ir_details) = &irs[ch];
            let sidecar = json!({
                "session": session.name,
                "sentence": sentence.id,
                "channel": name,
                "microphone": session.mics[ch],
                "room": {
                    "name": session.room,
                    "dimensions": room.dimensions(),
                    "wall_coefficients": wall_coefficients(room)?,
                    "speed_of_sound": room.speed_of_sound(),
                },
                "source": {
                    "position": session.source.position,
                    "azimuth_deg": session.azimuth_deg,
                    "elevation_deg": session.elevation_deg,
                    "directivity": session.source.directivity,
                },
                "impulse_response": {
                    "provenance": ir.provenance(),
                    "length": ir.len(),
                    "direct_path_index": ir.direct_path_index(),
                    "details": ir_details,
                },
                "seed": seed,
                "snr_db": m.noise.as_ref().map(|n| n.snr_db),
                "noise_gain": out.noise_gains.as_ref().map(|g| g[ch]),
                "normalization_gain": out.normalization_gain,
                "clean_quality": quality,
                "sample_rate": m.sample_rate,
                "num_samples": signal.len(),
                "format": m.output.format,
            });
            for (final_path, is_wav) in [(&wav, true), (&side, false)] {
                let partial = final_path.with_extension(if is_wav { "wav.partial" } else { "json.partial" });
                if is_wav {
                    write_wav(&partial, &signal, m.output.format)?;
                } else {
                    write_json(&partial, &sidecar)?;
                }
                staged.push((partial, final_path.clone()));
            }
        }
        Ok(())
    };
    write(&mut staged)?;
    for (partial, final_path) in &staged {
        fs::rename(partial, final_path).map_err(|e| Error::io(final_path, e))?;
        if final_path.extension().is_some_and(|e| e == "wav") {
            files.push(relative(&m.output_dir, final_path));
        }
    }
    Ok(UtteranceRecord {
        session: session.name.clone(),
        sentence: sentence.id.clone(),
        seed,
        duration_s: out.signal.duration(),
        files,
    })
}

fn relative(base: &Path, path: &Path) -> String {
    path.strip_prefix(base)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}
