//! Scenario manifests: rooms, microphone arrays and speaker sessions.
//!
//! Manifests are JSON. Geometry is in meters and angles in degrees; both
//! are converted to the internal types during validation. Validation
//! collects every problem it finds, each tagged with the JSON path of the
//! offending field.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::acoustics::{Directivity, MicSpec, Orientation, RoomSpec, SourceSpec, Vec3, WallReflectivity};
use crate::audio::SampleFormat;
use crate::contaminate::{Normalization, SnrReference};
use crate::error::{Error, Result};
use crate::rir::{wall_coefficients, ImageSynthesisConfig};
use crate::signal::PIPELINE_SAMPLE_RATES;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestIssue {
    pub path: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ManifestErrors(pub Vec<ManifestIssue>);

impl ManifestErrors {
    fn push(&mut self, path: impl Into<String>, message: impl fmt::Display) {
        self.0.push(ManifestIssue {
            path: path.into(),
            message: message.to_string(),
        });
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &ManifestIssue> {
        self.0.iter()
    }
}

impl fmt::Display for ManifestErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, issue) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "  {}: {}", issue.path, issue.message)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RoomEntry {
    name: String,
    dimensions: Vec3,
    reflectivity: WallReflectivity,
    speed_of_sound: Option<f64>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct ArrayEntry {
    name: String,
    mics: Vec<MicSpec>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SourceEntry {
    position: Vec3,
    #[serde(default)]
    azimuth_deg: f64,
    #[serde(default)]
    elevation_deg: f64,
    /// Custom tables give angles in degrees.
    #[serde(default = "omni")]
    directivity: Directivity,
}

fn omni() -> Directivity {
    Directivity::Omnidirectional
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
enum IrEntry {
    #[default]
    Synthesize,
    /// One IR file per microphone id.
    Files { files: BTreeMap<String, String> },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum SentenceEntry {
    Id(String),
    WithFile { id: String, file: String },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct SessionEntry {
    name: String,
    room: String,
    arrays: Vec<String>,
    source: SourceEntry,
    #[serde(default)]
    ir: IrEntry,
    sentences: Vec<SentenceEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub file: PathBuf,
    pub snr_db: f64,
    #[serde(default)]
    pub reference: SnrReference,
    #[serde(default)]
    pub per_channel_offsets: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ChannelNaming {
    /// Channel named after the microphone id.
    #[default]
    MicId,
    /// `ch01`, `ch02`, ... in session channel order.
    Index,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub format: SampleFormat,
    pub normalization: Normalization,
    pub channel_naming: ChannelNaming,
}

#[derive(Debug, Clone, PartialEq)]
pub enum IrPlan {
    Synthesize,
    Files(BTreeMap<String, PathBuf>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentenceRef {
    pub id: String,
    pub file: PathBuf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Session {
    pub name: String,
    pub room: String,
    /// Microphones of all referenced arrays, in manifest order.
    pub mics: Vec<MicSpec>,
    pub source: SourceSpec,
    pub azimuth_deg: f64,
    pub elevation_deg: f64,
    pub ir: IrPlan,
    pub sentences: Vec<SentenceRef>,
}

impl Session {
    pub fn channel_names(&self, naming: ChannelNaming) -> Vec<String> {
        match naming {
            ChannelNaming::MicId => self.mics.iter().map(|m| m.id.clone()).collect(),
            ChannelNaming::Index => (1..=self.mics.len()).map(|i| format!("ch{i:02}")).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioManifest {
    pub seed: u64,
    pub sample_rate: u32,
    pub clean_dir: PathBuf,
    pub output_dir: PathBuf,
    pub rooms: BTreeMap<String, RoomSpec>,
    pub arrays: BTreeMap<String, Vec<MicSpec>>,
    pub noise: Option<NoiseConfig>,
    pub synthesis: ImageSynthesisConfig,
    pub output: OutputConfig,
    /// Clean files estimated below this SNR fail their job.
    pub clean_min_snr_db: Option<f64>,
    pub sessions: Vec<Session>,
}

/// One utterance to render: a sentence of a session.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JobRef {
    pub session: usize,
    pub sentence: usize,
}

const TOP_LEVEL_KEYS: [&str; 12] = [
    "version",
    "seed",
    "sample_rate",
    "clean_dir",
    "output_dir",
    "rooms",
    "arrays",
    "noise",
    "synthesis",
    "output",
    "clean_min_snr_db",
    "sessions",
];

fn take<T: DeserializeOwned>(errors: &mut ManifestErrors, path: &str, value: Value) -> Option<T> {
    serde_json::from_value(value).map_err(|e| errors.push(path, e)).ok()
}

fn field<T: DeserializeOwned>(
    errors: &mut ManifestErrors,
    root: &Map<String, Value>,
    key: &str,
    default: Option<T>,
) -> Option<T> {
    match root.get(key) {
        Some(v) => take(errors, key, v.clone()),
        None if default.is_some() => default,
        None => {
            errors.push(key, "missing required field");
            None
        }
    }
}

fn list(errors: &mut ManifestErrors, root: &Map<String, Value>, key: &str) -> Vec<(String, Value)> {
    match root.get(key) {
        None => {
            errors.push(key, "missing required field");
            Vec::new()
        }
        Some(Value::Array(items)) => items
            .iter()
            .enumerate()
            .map(|(i, v)| (format!("{key}[{i}]"), v.clone()))
            .collect(),
        Some(_) => {
            errors.push(key, "expected an array");
            Vec::new()
        }
    }
}

/// A name usable as a single path component.
fn check_name(errors: &mut ManifestErrors, path: &str, name: &str) {
    if name.is_empty() || name == "." || name == ".." || name.contains(['/', '\\']) || name.contains('\0') {
        errors.push(path, format!("{name:?} is not usable as a file name"));
    }
}

fn degrees_table(d: Directivity) -> Directivity {
    match d {
        Directivity::Custom { table } => Directivity::Custom {
            table: table.into_iter().map(|(a, g)| (a.to_radians(), g)).collect(),
        },
        other => other,
    }
}

/// Parses and validates a manifest. File references are kept as written;
/// see [`load_manifest`] for resolution and existence checks.
pub fn parse_manifest(text: &str) -> std::result::Result<ScenarioManifest, ManifestErrors> {
    let mut errors = ManifestErrors::default();
    let root: Map<String, Value> = match serde_json::from_str(text) {
        Ok(Value::Object(map)) => map,
        Ok(_) => {
            errors.push("$", "manifest must be a JSON object");
            return Err(errors);
        }
        Err(e) => {
            errors.push("$", e);
            return Err(errors);
        }
    };
    for key in root.keys() {
        if !TOP_LEVEL_KEYS.contains(&key.as_str()) {
            errors.push(key.as_str(), "unknown field");
        }
    }
    let version: u32 = field(&mut errors, &root, "version", Some(MANIFEST_VERSION)).unwrap_or(MANIFEST_VERSION);
    if version != MANIFEST_VERSION {
        errors.push("version", format!("unsupported version {version}"));
    }
    let seed: u64 = field(&mut errors, &root, "seed", Some(0)).unwrap_or(0);
    let sample_rate: u32 = field(&mut errors, &root, "sample_rate", None).unwrap_or(16_000);
    if !PIPELINE_SAMPLE_RATES.contains(&sample_rate) {
        errors.push("sample_rate", format!("{sample_rate} Hz; expected 16000 or 48000"));
    }
    let clean_dir: PathBuf = field(&mut errors, &root, "clean_dir", Some(PathBuf::from("."))).unwrap_or_default();
    let output_dir: PathBuf = field(&mut errors, &root, "output_dir", None).unwrap_or_default();
    let clean_min_snr_db: Option<f64> = field(&mut errors, &root, "clean_min_snr_db", Some(None)).flatten();

    let mut synthesis: ImageSynthesisConfig = field(&mut errors, &root, "synthesis", Some(ImageSynthesisConfig::default()))
        .unwrap_or_default();
    if root
        .get("synthesis")
        .and_then(|s| s.get("sample_rate"))
        .is_some()
    {
        errors.push("synthesis.sample_rate", "set the top-level sample_rate instead");
    }
    synthesis.sample_rate = sample_rate;
    if let Err(e) = synthesis.validate() {
        errors.push("synthesis", e);
    }

    let output: OutputConfig = field(&mut errors, &root, "output", Some(OutputConfig::default())).unwrap_or_default();

    let noise: Option<NoiseConfig> = field(&mut errors, &root, "noise", Some(None)).flatten();
    if let Some(n) = &noise {
        if !n.snr_db.is_finite() {
            errors.push("noise.snr_db", "must be finite");
        }
    }

    let mut rooms = BTreeMap::new();
    for (path, v) in list(&mut errors, &root, "rooms") {
        let Some(entry) = take::<RoomEntry>(&mut errors, &path, v) else {
            continue;
        };
        check_name(&mut errors, &format!("{path}.name"), &entry.name);
        let room = RoomSpec::with_speed_of_sound(
            entry.dimensions,
            entry.reflectivity,
            entry.speed_of_sound.unwrap_or(crate::acoustics::DEFAULT_SPEED_OF_SOUND),
        )
        .and_then(|room| wall_coefficients(&room).map(|_| room));
        match room {
            Ok(room) => {
                if rooms.insert(entry.name.clone(), room).is_some() {
                    errors.push(format!("{path}.name"), format!("duplicate room {:?}", entry.name));
                }
            }
            Err(e) => errors.push(path, e),
        }
    }

    let mut arrays = BTreeMap::new();
    for (path, v) in list(&mut errors, &root, "arrays") {
        let Some(entry) = take::<ArrayEntry>(&mut errors, &path, v) else {
            continue;
        };
        if entry.mics.is_empty() {
            errors.push(format!("{path}.mics"), "array has no microphones");
        }
        for (i, mic) in entry.mics.iter().enumerate() {
            check_name(&mut errors, &format!("{path}.mics[{i}].id"), &mic.id);
            if !mic.position.is_finite() {
                errors.push(format!("{path}.mics[{i}].position"), "not finite");
            }
        }
        if arrays.insert(entry.name.clone(), entry.mics).is_some() {
            errors.push(format!("{path}.name"), format!("duplicate array {:?}", entry.name));
        }
    }

    let mut sessions = Vec::new();
    let mut session_names = BTreeSet::new();
    for (path, v) in list(&mut errors, &root, "sessions") {
        let Some(entry) = take::<SessionEntry>(&mut errors, &path, v) else {
            continue;
        };
        if let Some(s) = validate_session(&mut errors, &path, entry, &rooms, &arrays, &clean_dir) {
            if !session_names.insert(s.name.clone()) {
                errors.push(format!("{path}.name"), format!("duplicate session {:?}", s.name));
            }
            sessions.push(s);
        }
    }

    if !errors.is_empty() {
        return Err(errors);
    }
    Ok(ScenarioManifest {
        seed,
        sample_rate,
        clean_dir,
        output_dir,
        rooms,
        arrays,
        noise,
        synthesis,
        output,
        clean_min_snr_db,
        sessions,
    })
}

fn validate_session(
    errors: &mut ManifestErrors,
    path: &str,
    entry: SessionEntry,
    rooms: &BTreeMap<String, RoomSpec>,
    arrays: &BTreeMap<String, Vec<MicSpec>>,
    clean_dir: &Path,
) -> Option<Session> {
    let before = errors.len();
    let label = format!("session {:?}", entry.name);
    check_name(errors, &format!("{path}.name"), &entry.name);

    let room = rooms.get(&entry.room);
    if room.is_none() {
        errors.push(format!("{path}.room"), format!("{label} references unknown room {:?}", entry.room));
    }

    let source = SourceSpec::new(
        entry.source.position,
        Orientation::from_degrees(entry.source.azimuth_deg, entry.source.elevation_deg),
        degrees_table(entry.source.directivity),
    );
    let source = match source {
        Ok(s) => Some(s),
        Err(e) => {
            errors.push(format!("{path}.source"), e);
            None
        }
    };
    if let (Some(room), Some(src)) = (room, &source) {
        if !room.contains(src.position) {
            errors.push(
                format!("{path}.source.position"),
                format!("{label}: speaker position {:?} is outside room {:?}", src.position.to_array(), entry.room),
            );
        }
    }

    let mut mics: Vec<MicSpec> = Vec::new();
    if entry.arrays.is_empty() {
        errors.push(format!("{path}.arrays"), "no arrays listed");
    }
    for (i, name) in entry.arrays.iter().enumerate() {
        let Some(array) = arrays.get(name) else {
            errors.push(format!("{path}.arrays[{i}]"), format!("{label} references unknown array {name:?}"));
            continue;
        };
        for mic in array {
            if mics.iter().any(|m| m.id == mic.id) {
                errors.push(format!("{path}.arrays[{i}]"), format!("{label}: microphone id {:?} appears twice", mic.id));
                continue;
            }
            if let Some(room) = room {
                if !room.contains(mic.position) {
                    errors.push(
                        format!("{path}.arrays[{i}]"),
                        format!("{label}: microphone {:?} is outside room {:?}", mic.id, entry.room),
                    );
                }
            }
            if let Some(src) = &source {
                if src.position.distance(mic.position) == 0.0 {
                    errors.push(
                        format!("{path}.source.position"),
                        format!("{label}: speaker coincides with microphone {:?}", mic.id),
                    );
                }
            }
            mics.push(mic.clone());
        }
    }

    let ir = match entry.ir {
        IrEntry::Synthesize => IrPlan::Synthesize,
        IrEntry::Files { files } => {
            for mic in &mics {
                if !files.contains_key(&mic.id) {
                    errors.push(format!("{path}.ir.files"), format!("no IR file for microphone {:?}", mic.id));
                }
            }
            for id in files.keys() {
                if !mics.iter().any(|m| &m.id == id) {
                    errors.push(format!("{path}.ir.files.{id}"), "not a microphone of this session");
                }
            }
            IrPlan::Files(files.into_iter().map(|(k, v)| (k, PathBuf::from(v))).collect())
        }
    };

    let mut seen = BTreeSet::new();
    let mut sentences = Vec::new();
    for (i, s) in entry.sentences.into_iter().enumerate() {
        let (id, file) = match s {
            SentenceEntry::Id(id) => {
                let file = clean_dir.join(format!("{id}.wav"));
                (id, file)
            }
            SentenceEntry::WithFile { id, file } => (id, PathBuf::from(file)),
        };
        let spath = format!("{path}.sentences[{i}]");
        check_name(errors, &spath, &id);
        if !seen.insert(id.clone()) {
            errors.push(spath, format!("{label}: duplicate sentence id {id:?}"));
        }
        sentences.push(SentenceRef { id, file });
    }

    if errors.len() > before {
        return None;
    }
    Some(Session {
        name: entry.name,
        room: entry.room,
        mics,
        source: source?,
        azimuth_deg: entry.source.azimuth_deg,
        elevation_deg: entry.source.elevation_deg,
        ir,
        sentences,
    })
}

impl ScenarioManifest {
    /// One job per sentence, in session order.
    pub fn jobs(&self) -> Vec<JobRef> {
        self.sessions
            .iter()
            .enumerate()
            .flat_map(|(si, s)| (0..s.sentences.len()).map(move |ti| JobRef { session: si, sentence: ti }))
            .collect()
    }

    /// Seed of one utterance, derived from the global seed and its ids.
    pub fn job_seed(&self, job: JobRef) -> u64 {
        let session = &self.sessions[job.session];
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(session.name.as_bytes());
        h.update([0u8]);
        h.update(session.sentences[job.sentence].id.as_bytes());
        let digest = h.finalize();
        u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
    }

    /// Makes relative file references relative to `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.clean_dir);
        fix(&mut self.output_dir);
        if let Some(n) = &mut self.noise {
            fix(&mut n.file);
        }
        for s in &mut self.sessions {
            for t in &mut s.sentences {
                fix(&mut t.file);
            }
            if let IrPlan::Files(files) = &mut s.ir {
                files.values_mut().for_each(fix);
            }
        }
    }

    /// Checks that every referenced audio file exists, is readable and has
    /// the manifest's sample rate.
    pub fn check_files(&self) -> ManifestErrors {
        let mut errors = ManifestErrors::default();
        let mut check = |path: String, file: &Path, mono: bool| match hound::WavReader::open(file) {
            Ok(r) => {
                let spec = r.spec();
                if spec.sample_rate != self.sample_rate {
                    errors.push(
                        path,
                        format!("{}: {} Hz, manifest uses {} Hz", file.display(), spec.sample_rate, self.sample_rate),
                    );
                } else if mono && spec.channels != 1 {
                    errors.push(path, format!("{}: expected mono, found {} channels", file.display(), spec.channels));
                }
            }
            Err(e) => errors.push(path, format!("{}: {e}", file.display())),
        };
        if let Some(n) = &self.noise {
            check("noise.file".into(), &n.file, false);
        }
        for (si, s) in self.sessions.iter().enumerate() {
            for (ti, t) in s.sentences.iter().enumerate() {
                check(format!("sessions[{si}].sentences[{ti}]"), &t.file, true);
            }
            if let IrPlan::Files(files) = &s.ir {
                for (id, f) in files {
                    check(format!("sessions[{si}].ir.files.{id}"), f, true);
                }
            }
        }
        errors
    }
}

/// Reads, validates and resolves a manifest file, including file checks.
pub fn load_manifest(path: &Path) -> Result<ScenarioManifest> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut manifest = parse_manifest(&text).map_err(Error::Manifest)?;
    let base = path.parent().unwrap_or(Path::new("."));
    manifest.resolve_paths(base);
    let missing = manifest.check_files();
    if missing.is_empty() {
        Ok(manifest)
    } else {
        Err(Error::Manifest(missing))
    }
}
