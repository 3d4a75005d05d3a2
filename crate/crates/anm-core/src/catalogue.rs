//! On-disk formats: catalogue, stimulus, genome, and ideal-response files
//! (JSON), run manifests, and the CSV report writers.
//!
//! Every structured file carries a `format_version` and loads back to
//! structures equal to those saved. Spike times are serialised as integers
//! in units of the simulation step so files are bit-stable across
//! platforms. Writes go through a temporary file and a rename, so a failed
//! write never leaves a half-written artifact under the target name.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::genome::{MicrocircuitGenome, MutationMode};
use crate::search::{ArchiveEntry, BehaviourRecord, NoveltyArchive};
use crate::sim::SpikeTrain;
use crate::stimulus::{
    encode_patterns, ideal_responses, CorrelationReport, EncodingParams, MakeupReport,
    SeparabilityReport, StimulusProgram,
};

/// Version stamped into every structured file this crate writes.
pub const FORMAT_VERSION: u32 = 1;

/// Errors from reading and writing artifact files.
#[derive(Debug, Error)]
pub enum CatalogueError {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("corrupt file {path}: {detail}")]
    Corrupt { path: PathBuf, detail: String },
    #[error("unsupported format version {found} (this build reads version {expected})")]
    VersionMismatch { found: u64, expected: u32 },
    #[error("partial write to {path} ({detail}); no file was replaced")]
    PartialWrite { path: PathBuf, detail: String },
    #[error("spike time {time} ms is not an integral multiple of {unit} ms")]
    NonIntegralTime { time: f64, unit: f64 },
    #[error("catalogue entry {entry} is invalid: {detail}")]
    InvalidEntry { entry: usize, detail: String },
}

/// A spike train stored as integer step counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRepr {
    /// Milliseconds per step.
    pub unit_ms: f64,
    pub duration_ms: f64,
    /// Spike times, in steps.
    pub times: Vec<u64>,
}

impl TrainRepr {
    /// Represent a train on the given step grid. Every spike time must be
    /// an exact multiple of `unit_ms`, which holds by construction for
    /// simulator outputs (step grid) and encoder outputs (spike-rate grid).
    pub fn from_train(train: &SpikeTrain, unit_ms: f64) -> Result<TrainRepr, CatalogueError> {
        let mut times = Vec::with_capacity(train.len());
        for &t in train.times() {
            let k = (t / unit_ms).round();
            if !(k >= 0.0) || (k * unit_ms).to_bits() != t.to_bits() {
                return Err(CatalogueError::NonIntegralTime { time: t, unit: unit_ms });
            }
            times.push(k as u64);
        }
        Ok(TrainRepr { unit_ms, duration_ms: train.duration_ms(), times })
    }

    /// Reconstruct the train, bit-identical to the one represented.
    pub fn to_train(&self) -> Result<SpikeTrain, String> {
        let times = self.times.iter().map(|&k| k as f64 * self.unit_ms).collect();
        SpikeTrain::new(self.duration_ms, times).map_err(|e| e.to_string())
    }
}

/// Reference to an input file by content, so a manifest identifies the
/// same run regardless of where the inputs lived.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRef {
    /// What the file was used as ("stimulus", "catalogue", ...).
    pub role: String,
    /// File name, without directories.
    pub name: String,
    /// SHA-256 of the file contents, lowercase hex.
    pub sha256: String,
}

/// Everything needed to replay a run: the command, the seed, the settings,
/// and content hashes of the inputs. Deliberately free of absolute paths
/// and timestamps so equal runs produce equal manifests.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub command: String,
    pub seed: u64,
    pub settings: serde_json::Value,
    pub inputs: Vec<InputRef>,
}

impl RunManifest {
    pub fn new<S: Serialize>(command: &str, seed: u64, settings: &S) -> RunManifest {
        RunManifest {
            format_version: FORMAT_VERSION,
            command: command.to_string(),
            seed,
            settings: serde_json::to_value(settings).expect("settings serialise to JSON"),
            inputs: Vec::new(),
        }
    }

    /// Record an input file by role, name, and content hash.
    pub fn add_input(&mut self, role: &str, path: &Path) -> Result<(), CatalogueError> {
        let bytes = fs::read(path).map_err(|source| CatalogueError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let name = path
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_default();
        self.inputs.push(InputRef { role: role.to_string(), name, sha256: sha256_hex(&bytes) });
        Ok(())
    }

    /// Hash of the manifest itself; stamped into every CSV this run emits.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("manifest serialises to JSON");
        sha256_hex(json.as_bytes())
    }

    pub fn save(&self, path: &Path) -> Result<(), CatalogueError> {
        write_json(path, self)
    }
}

fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

/// One archived behaviour as stored on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BehaviourRepr {
    pub genome_id: u64,
    pub outputs: Vec<TrainRepr>,
    pub sparseness: f64,
    pub generation: u32,
}

/// One catalogue member: a genome, the behaviour that earned admission,
/// and the threshold in force when it was admitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueEntry {
    pub genome: MicrocircuitGenome,
    pub behaviour: BehaviourRepr,
    pub threshold_at_admission: f64,
}

/// The catalogue file: manifest, admitted entries, and per-generation
/// traces of threshold, mutation mode, and mean complexity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogueFile {
    pub format_version: u32,
    pub manifest: RunManifest,
    pub entries: Vec<CatalogueEntry>,
    pub threshold_history: Vec<f64>,
    pub mode_history: Vec<MutationMode>,
    pub complexity_history: Vec<f64>,
}

impl CatalogueFile {
    /// Package an archive for disk. `unit_ms` is the simulation step the
    /// behaviour trains were recorded on.
    pub fn from_archive(
        archive: &NoveltyArchive,
        manifest: RunManifest,
        unit_ms: f64,
    ) -> Result<CatalogueFile, CatalogueError> {
        let entries = archive
            .entries
            .iter()
            .map(|e| {
                let outputs = e
                    .behaviour
                    .outputs
                    .iter()
                    .map(|t| TrainRepr::from_train(t, unit_ms))
                    .collect::<Result<_, _>>()?;
                Ok(CatalogueEntry {
                    genome: e.genome.clone(),
                    behaviour: BehaviourRepr {
                        genome_id: e.behaviour.genome_id,
                        outputs,
                        sparseness: e.behaviour.sparseness,
                        generation: e.behaviour.generation,
                    },
                    threshold_at_admission: e.threshold_at_admission,
                })
            })
            .collect::<Result<_, CatalogueError>>()?;
        Ok(CatalogueFile {
            format_version: FORMAT_VERSION,
            manifest,
            entries,
            threshold_history: archive.threshold_history.clone(),
            mode_history: archive.mode_history.clone(),
            complexity_history: archive.complexity_history.clone(),
        })
    }

    /// Rebuild the in-memory archive, bit-identical to the one saved.
    pub fn to_archive(&self) -> Result<NoveltyArchive, CatalogueError> {
        let entries = self
            .entries
            .iter()
            .enumerate()
            .map(|(i, e)| {
                e.genome
                    .validate()
                    .map_err(|err| CatalogueError::InvalidEntry { entry: i, detail: err.to_string() })?;
                let outputs = e
                    .behaviour
                    .outputs
                    .iter()
                    .map(|t| t.to_train())
                    .collect::<Result<_, _>>()
                    .map_err(|detail| CatalogueError::InvalidEntry { entry: i, detail })?;
                Ok(ArchiveEntry {
                    genome: e.genome.clone(),
                    behaviour: BehaviourRecord {
                        genome_id: e.behaviour.genome_id,
                        outputs,
                        sparseness: e.behaviour.sparseness,
                        generation: e.behaviour.generation,
                    },
                    threshold_at_admission: e.threshold_at_admission,
                })
            })
            .collect::<Result<_, CatalogueError>>()?;
        Ok(NoveltyArchive {
            entries,
            threshold_history: self.threshold_history.clone(),
            mode_history: self.mode_history.clone(),
            complexity_history: self.complexity_history.clone(),
        })
    }
}

/// Save an archive with its manifest. `unit_ms` is the simulation step.
pub fn save_catalogue(
    archive: &NoveltyArchive,
    manifest: RunManifest,
    unit_ms: f64,
    path: &Path,
) -> Result<(), CatalogueError> {
    write_json(path, &CatalogueFile::from_archive(archive, manifest, unit_ms)?)
}

/// Load a catalogue back into an archive plus the manifest it ran under.
pub fn load_catalogue(path: &Path) -> Result<(NoveltyArchive, RunManifest), CatalogueError> {
    let file: CatalogueFile = read_json(path)?;
    Ok((file.to_archive()?, file.manifest))
}

/// The stimulus file: encoding parameters and the pattern sequence, with
/// the channel trains optionally materialised for external consumers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusFile {
    pub format_version: u32,
    pub params: EncodingParams,
    pub patterns: Vec<u8>,
    /// Input-channel trains on the spike-rate step grid; redundant with
    /// `patterns` + `params` and verified against them on load.
    pub trains: Option<Vec<TrainRepr>>,
}

/// Save a stimulus program; `include_trains` materialises the channel
/// trains in the file.
pub fn save_stimulus(
    program: &StimulusProgram,
    include_trains: bool,
    path: &Path,
) -> Result<(), CatalogueError> {
    let trains = if include_trains {
        let unit = 1.0 / program.params.spike_rate_per_ms;
        Some(
            program
                .trains
                .iter()
                .map(|t| TrainRepr::from_train(t, unit))
                .collect::<Result<Vec<_>, _>>()?,
        )
    } else {
        None
    };
    write_json(
        path,
        &StimulusFile {
            format_version: FORMAT_VERSION,
            params: program.params.clone(),
            patterns: program.patterns.clone(),
            trains,
        },
    )
}

/// Load a stimulus program, re-encoding the pattern sequence and checking
/// any materialised trains against it.
pub fn load_stimulus(path: &Path) -> Result<StimulusProgram, CatalogueError> {
    let file: StimulusFile = read_json(path)?;
    let program = encode_patterns(&file.patterns, &file.params).map_err(|e| {
        CatalogueError::Corrupt { path: path.to_path_buf(), detail: e.to_string() }
    })?;
    if let Some(trains) = file.trains {
        let unit = 1.0 / program.params.spike_rate_per_ms;
        for (channel, stored) in trains.iter().enumerate() {
            let rebuilt = program
                .trains
                .get(channel)
                .map(|t| TrainRepr::from_train(t, unit))
                .transpose()?;
            if rebuilt.as_ref() != Some(stored) {
                return Err(CatalogueError::Corrupt {
                    path: path.to_path_buf(),
                    detail: format!(
                        "materialised train for channel {channel} disagrees with the pattern sequence"
                    ),
                });
            }
        }
    }
    Ok(program)
}

/// A single genome with the fitness it earned, as written by targeted
/// evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenomeFile {
    pub format_version: u32,
    pub genome: MicrocircuitGenome,
    /// Distance to the target, when the genome came out of a fitness run.
    pub fitness: Option<f64>,
}

pub fn save_genome(
    genome: &MicrocircuitGenome,
    fitness: Option<f64>,
    path: &Path,
) -> Result<(), CatalogueError> {
    write_json(
        path,
        &GenomeFile { format_version: FORMAT_VERSION, genome: genome.clone(), fitness },
    )
}

pub fn load_genome(path: &Path) -> Result<GenomeFile, CatalogueError> {
    let file: GenomeFile = read_json(path)?;
    file.genome.validate().map_err(|e| CatalogueError::Corrupt {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    Ok(file)
}

/// One pattern's ideal response train.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealEntry {
    pub pattern: u8,
    pub train: TrainRepr,
}

/// Ideal response trains for every distinct pattern of a stimulus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealFile {
    pub format_version: u32,
    pub entries: Vec<IdealEntry>,
}

/// Save the ideal responses of a stimulus, one train per distinct pattern,
/// in ascending pattern order.
pub fn save_ideal_responses(program: &StimulusProgram, path: &Path) -> Result<(), CatalogueError> {
    let unit = 1.0 / program.params.spike_rate_per_ms;
    let entries = ideal_responses(program)
        .iter()
        .map(|(&pattern, train)| {
            Ok(IdealEntry { pattern, train: TrainRepr::from_train(train, unit)? })
        })
        .collect::<Result<_, CatalogueError>>()?;
    write_json(path, &IdealFile { format_version: FORMAT_VERSION, entries })
}

/// Load ideal responses as (pattern, train) pairs.
pub fn load_ideal_responses(path: &Path) -> Result<Vec<(u8, SpikeTrain)>, CatalogueError> {
    let file: IdealFile = read_json(path)?;
    file.entries
        .iter()
        .map(|e| {
            let train = e.train.to_train().map_err(|detail| CatalogueError::Corrupt {
                path: path.to_path_buf(),
                detail,
            })?;
            Ok((e.pattern, train))
        })
        .collect()
}

/// Write any serialisable value as pretty JSON, atomically.
fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CatalogueError> {
    let mut json = serde_json::to_string_pretty(value).expect("value serialises to JSON");
    json.push('\n');
    write_text(path, &json)
}

/// Read and version-check a structured file.
fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CatalogueError> {
    let bytes = fs::read(path).map_err(|source| CatalogueError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let value: serde_json::Value = serde_json::from_slice(&bytes).map_err(|e| {
        CatalogueError::Corrupt { path: path.to_path_buf(), detail: e.to_string() }
    })?;
    let found = value
        .get("format_version")
        .and_then(|v| v.as_u64())
        .ok_or_else(|| CatalogueError::Corrupt {
            path: path.to_path_buf(),
            detail: "missing format_version".to_string(),
        })?;
    if found != FORMAT_VERSION as u64 {
        return Err(CatalogueError::VersionMismatch { found, expected: FORMAT_VERSION });
    }
    serde_json::from_value(value).map_err(|e| CatalogueError::Corrupt {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}

/// Write text through a sibling temporary file and a rename, so the target
/// name never holds a partial write.
pub fn write_text(path: &Path, text: &str) -> Result<(), CatalogueError> {
    let file_name = path.file_name().ok_or_else(|| CatalogueError::Io {
        path: path.to_path_buf(),
        source: io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"),
    })?;
    let mut tmp_name = file_name.to_os_string();
    tmp_name.push(".tmp");
    let tmp = path.with_file_name(tmp_name);
    let write_then_rename = fs::write(&tmp, text).and_then(|()| fs::rename(&tmp, path));
    if let Err(e) = write_then_rename {
        let _ = fs::remove_file(&tmp);
        return Err(CatalogueError::PartialWrite {
            path: path.to_path_buf(),
            detail: e.to_string(),
        });
    }
    Ok(())
}

fn manifest_line(hash: &str) -> String {
    format!("# manifest {hash}\n")
}

/// Correlation report CSV: `pattern,count,mean,class`, one row per
/// pattern/output pairing, stamped with the run-manifest hash.
pub fn correlation_csv(report: &CorrelationReport, manifest_hash: &str) -> String {
    let mut out = manifest_line(manifest_hash);
    out.push_str("pattern,count,mean,class\n");
    for row in &report.rows {
        out.push_str(&format!(
            "{},{},{:.6},{}\n",
            row.pattern, row.occurrences, row.mean_spikes, row.strength
        ));
    }
    out
}

/// Motif-makeup CSV: `group,motif,share_percent`, with the overall shares
/// first and one group per lineage generation after.
pub fn makeup_csv(report: &MakeupReport, manifest_hash: &str) -> String {
    let mut out = manifest_line(manifest_hash);
    out.push_str("group,motif,share_percent\n");
    for (motif, share) in &report.overall {
        out.push_str(&format!("overall,{motif},{share:.6}\n"));
    }
    for (generation, shares) in &report.by_generation {
        for (motif, share) in shares {
            out.push_str(&format!("{generation},{motif},{share:.6}\n"));
        }
    }
    out
}

/// Novelty-run trace CSV: one row per generation with the threshold,
/// admissions, mean complexity, and mutation mode in force.
pub fn novelty_trace_csv(archive: &NoveltyArchive, manifest_hash: &str) -> String {
    let admissions = archive.admissions_per_generation();
    let mut out = manifest_line(manifest_hash);
    out.push_str("generation,threshold,admissions,mean_complexity,mode\n");
    for g in 0..archive.threshold_history.len() {
        out.push_str(&format!(
            "{},{:.6},{},{:.6},{}\n",
            g,
            archive.threshold_history[g],
            admissions[g],
            archive.complexity_history[g],
            archive.mode_history[g]
        ));
    }
    out
}

/// Stimulus-optimiser trace CSV: best fitness and separable-pair count per
/// generation.
pub fn stimulus_trace_csv(trace: &[(f64, usize)], manifest_hash: &str) -> String {
    let mut out = manifest_line(manifest_hash);
    out.push_str("generation,best_fitness,pairs_over_threshold\n");
    for (g, (fitness, over)) in trace.iter().enumerate() {
        out.push_str(&format!("{g},{fitness:.6},{over}\n"));
    }
    out
}

/// Targeted-evolution trace CSV: best distance to the target per
/// generation.
pub fn targeted_trace_csv(trace: &[f64], manifest_hash: &str) -> String {
    let mut out = manifest_line(manifest_hash);
    out.push_str("generation,best_distance\n");
    for (g, distance) in trace.iter().enumerate() {
        out.push_str(&format!("{g},{distance:.6}\n"));
    }
    out
}

/// Separability heatmap CSV: the labelled distance matrix under the
/// manifest hash.
pub fn heatmap_csv(report: &SeparabilityReport, manifest_hash: &str) -> String {
    let mut bytes = manifest_line(manifest_hash).into_bytes();
    report.matrix.write_csv(&mut bytes).expect("writing to a Vec cannot fail");
    String::from_utf8(bytes).expect("CSV is UTF-8")
}

/// Separability over-threshold counts CSV: per pattern, how many other
/// patterns sit at or above the threshold.
pub fn over_counts_csv(report: &SeparabilityReport, manifest_hash: &str) -> String {
    let mut out = manifest_line(manifest_hash);
    out.push_str("pattern,partners_over_threshold\n");
    for (pattern, count) in report.patterns.iter().zip(&report.over_counts) {
        out.push_str(&format!("{pattern},{count}\n"));
    }
    out
}
