//! Stimulus encoding and response analysis.
//!
//! A stimulus is a sequence of byte patterns. Each pattern occupies one
//! window of the eight input channels: every set bit drives its channel
//! with a regular burst at the start of the window, the rest of the window
//! is silent. Analysis utilities derive per-pattern ideal responses,
//! pairwise separability, response correlation, and motif-makeup reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{GenomeError, MicrocircuitGenome};
use crate::metrics::{distance_matrix_labeled, DistanceMatrix, MetricError};
use crate::motif::MotifId;
use crate::sim::{SpikeTrain, INPUT_CHANNELS};

/// How byte patterns map onto channel bursts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingParams {
    /// Length of one pattern window in milliseconds.
    pub window_ms: f64,
    /// Burst length at the start of a window, in milliseconds.
    pub burst_ms: f64,
    /// Spikes per millisecond within a burst.
    pub spike_rate_per_ms: f64,
    /// Bit order: when true, bit 0 (least significant) drives channel 0;
    /// when false, bit 0 drives channel 7.
    pub lsb_channel_zero: bool,
}

impl Default for EncodingParams {
    fn default() -> Self {
        EncodingParams {
            window_ms: 50.0,
            burst_ms: 25.0,
            spike_rate_per_ms: 1.0,
            lsb_channel_zero: true,
        }
    }
}

impl EncodingParams {
    /// Number of spikes in one burst.
    pub fn burst_spikes(&self) -> usize {
        (self.burst_ms * self.spike_rate_per_ms).round() as usize
    }

    /// Check the parameters describe a realisable burst scheme.
    pub fn validate(&self) -> Result<(), EncodeError> {
        let ok = self.window_ms.is_finite()
            && self.window_ms > 0.0
            && self.burst_ms.is_finite()
            && self.burst_ms > 0.0
            && self.burst_ms <= self.window_ms
            && self.spike_rate_per_ms.is_finite()
            && self.spike_rate_per_ms > 0.0
            && self.burst_spikes() >= 1;
        if ok {
            Ok(())
        } else {
            Err(EncodeError::BadParams(format!(
                "window_ms={} burst_ms={} spike_rate_per_ms={}",
                self.window_ms, self.burst_ms, self.spike_rate_per_ms
            )))
        }
    }

    fn channel_of_bit(&self, bit: usize) -> usize {
        if self.lsb_channel_zero {
            bit
        } else {
            INPUT_CHANNELS - 1 - bit
        }
    }
}

/// Errors from stimulus construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EncodeError {
    #[error("stimulus must contain at least one pattern")]
    Empty,
    #[error("pattern at position {0} is zero; every pattern needs at least one active bit")]
    ZeroPattern(usize),
    #[error("character {ch:?} at position {position} does not fit a single-byte pattern")]
    NonAscii { position: usize, ch: char },
    #[error("invalid encoding parameters: {0}")]
    BadParams(String),
}

/// An encoded pattern sequence: the eight channel spike trains plus the
/// bookkeeping needed to analyse responses against it.
#[derive(Debug, Clone, PartialEq)]
pub struct StimulusProgram {
    pub params: EncodingParams,
    /// The pattern sequence, one byte per window.
    pub patterns: Vec<u8>,
    /// One spike train per input channel.
    pub trains: Vec<SpikeTrain>,
    pub duration_ms: f64,
    /// Distinct patterns mapped to the (sorted) window indices they occupy.
    alphabet: BTreeMap<u8, Vec<usize>>,
}

impl StimulusProgram {
    /// Distinct patterns and the window indices where each occurs.
    pub fn alphabet(&self) -> &BTreeMap<u8, Vec<usize>> {
        &self.alphabet
    }

    /// Distinct patterns in ascending byte order.
    pub fn distinct_patterns(&self) -> Vec<u8> {
        self.alphabet.keys().copied().collect()
    }

    /// Number of pattern windows.
    pub fn window_count(&self) -> usize {
        self.patterns.len()
    }
}

/// Encode a pattern sequence into channel spike trains.
pub fn encode_patterns(
    patterns: &[u8],
    params: &EncodingParams,
) -> Result<StimulusProgram, EncodeError> {
    params.validate()?;
    if patterns.is_empty() {
        return Err(EncodeError::Empty);
    }
    if let Some(position) = patterns.iter().position(|&p| p == 0) {
        return Err(EncodeError::ZeroPattern(position));
    }

    let n_burst = params.burst_spikes();
    let mut channel_times: Vec<Vec<f64>> = vec![Vec::new(); INPUT_CHANNELS];
    let mut alphabet: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (window, &pattern) in patterns.iter().enumerate() {
        alphabet.entry(pattern).or_default().push(window);
        let base = window as f64 * params.window_ms;
        for bit in 0..8 {
            if pattern >> bit & 1 == 1 {
                let channel = params.channel_of_bit(bit);
                for k in 0..n_burst {
                    channel_times[channel].push(base + k as f64 / params.spike_rate_per_ms);
                }
            }
        }
    }

    let duration_ms = patterns.len() as f64 * params.window_ms;
    let trains = channel_times
        .into_iter()
        .map(|times| SpikeTrain::new(duration_ms, times).expect("encoder emits sorted in-window times"))
        .collect();
    Ok(StimulusProgram {
        params: params.clone(),
        patterns: patterns.to_vec(),
        trains,
        duration_ms,
        alphabet,
    })
}

/// Encode a text, one character per window. Every character must fit a
/// single byte (ASCII); anything else is rejected with its position.
pub fn encode_text(text: &str, params: &EncodingParams) -> Result<StimulusProgram, EncodeError> {
    let mut patterns = Vec::new();
    for (position, ch) in text.chars().enumerate() {
        let code = ch as u32;
        if code > 0x7F {
            return Err(EncodeError::NonAscii { position, ch });
        }
        if code == 0 {
            return Err(EncodeError::ZeroPattern(position));
        }
        patterns.push(code as u8);
    }
    encode_patterns(&patterns, params)
}

/// The ideal response to each distinct pattern: a burst in every window
/// where the pattern occurs, silence elsewhere, over the full stimulus.
pub fn ideal_responses(program: &StimulusProgram) -> BTreeMap<u8, SpikeTrain> {
    let n_burst = program.params.burst_spikes();
    program
        .alphabet
        .iter()
        .map(|(&pattern, windows)| {
            let mut times = Vec::with_capacity(windows.len() * n_burst);
            for &window in windows {
                let base = window as f64 * program.params.window_ms;
                for k in 0..n_burst {
                    times.push(base + k as f64 / program.params.spike_rate_per_ms);
                }
            }
            let train = SpikeTrain::new(program.duration_ms, times)
                .expect("ideal responses are sorted in-window times");
            (pattern, train)
        })
        .collect()
}

/// Pairwise separability of a stimulus' ideal responses.
#[derive(Debug, Clone)]
pub struct SeparabilityReport {
    /// Distinct patterns in row order (ascending byte value).
    pub patterns: Vec<u8>,
    /// Pairwise distances between ideal responses, labelled by pattern byte.
    pub matrix: DistanceMatrix,
    /// The distance counted as "well separated".
    pub threshold: f64,
    /// Per pattern: how many other patterns sit at or above the threshold.
    pub over_counts: Vec<usize>,
    /// Unordered pairs at or above the threshold.
    pub pairs_over: usize,
}

/// Compute the separability report for a stimulus.
pub fn separability(
    program: &StimulusProgram,
    sample_dt: f64,
    threshold: f64,
) -> Result<SeparabilityReport, MetricError> {
    let ideals = ideal_responses(program);
    let patterns: Vec<u8> = ideals.keys().copied().collect();
    let trains: Vec<SpikeTrain> = ideals.into_values().collect();
    let labels = patterns.iter().map(|p| p.to_string()).collect();
    let matrix = distance_matrix_labeled(labels, &trains, sample_dt)?;
    let over_counts = matrix.over_threshold_counts(threshold);
    let pairs_over = matrix.pairs_over(threshold);
    Ok(SeparabilityReport { patterns, matrix, threshold, over_counts, pairs_over })
}

/// Strength of a pattern/output association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strength {
    /// No output spikes in the pattern's windows.
    None,
    /// Fewer than one output spike per occurrence on average.
    Weak,
    /// At least one output spike per occurrence on average.
    Strong,
}

impl std::fmt::Display for Strength {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Strength::None => "none",
            Strength::Weak => "weak",
            Strength::Strong => "strong",
        })
    }
}

/// One pattern/output pairing in a correlation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationRow {
    pub pattern: u8,
    pub output: usize,
    /// Number of windows the pattern occupies.
    pub occurrences: usize,
    /// Mean output spikes per occurrence window.
    pub mean_spikes: f64,
    pub strength: Strength,
}

/// Correlation of output activity with stimulus patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub rows: Vec<CorrelationRow>,
}

/// Relate each distinct pattern to each output train: the mean number of
/// output spikes falling inside the pattern's windows, classified as
/// none (0), weak (< 1), or strong (>= 1) per occurrence.
pub fn correlation_report(
    program: &StimulusProgram,
    outputs: &[SpikeTrain],
) -> Result<CorrelationReport, MetricError> {
    for out in outputs {
        if out.duration_ms() != program.duration_ms {
            return Err(MetricError::DurationMismatch(program.duration_ms, out.duration_ms()));
        }
    }
    let window = program.params.window_ms;
    let mut rows = Vec::new();
    for (&pattern, windows) in &program.alphabet {
        for (output, train) in outputs.iter().enumerate() {
            let mut spikes = 0usize;
            for &w in windows {
                let lo = w as f64 * window;
                let hi = lo + window;
                let times = train.times();
                let a = times.partition_point(|&t| t < lo);
                let b = times.partition_point(|&t| t < hi);
                spikes += b - a;
            }
            let mean_spikes = spikes as f64 / windows.len() as f64;
            let strength = if mean_spikes == 0.0 {
                Strength::None
            } else if mean_spikes < 1.0 {
                Strength::Weak
            } else {
                Strength::Strong
            };
            rows.push(CorrelationRow {
                pattern,
                output,
                occurrences: windows.len(),
                mean_spikes,
                strength,
            });
        }
    }
    Ok(CorrelationReport { rows })
}

/// Percentage share of each motif template in a set of genomes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MakeupReport {
    /// Total motif instances counted.
    pub total_instances: usize,
    /// Share (%) per template over all genomes, in canonical template order.
    pub overall: Vec<(MotifId, f64)>,
    /// Shares grouped by lineage generation, ascending.
    pub by_generation: Vec<(u32, Vec<(MotifId, f64)>)>,
}

/// Motif-makeup report over a collection of genomes.
pub fn motif_makeup(genomes: &[MicrocircuitGenome]) -> Result<MakeupReport, GenomeError> {
    if genomes.is_empty() {
        return Err(GenomeError::EmptyPopulation);
    }
    fn shares(counts: &BTreeMap<MotifId, usize>) -> (usize, Vec<(MotifId, f64)>) {
        let total: usize = counts.values().sum();
        let shares = MotifId::ALL
            .into_iter()
            .map(|id| {
                let n = counts.get(&id).copied().unwrap_or(0);
                (id, 100.0 * n as f64 / total as f64)
            })
            .collect();
        (total, shares)
    }

    let mut overall: BTreeMap<MotifId, usize> = BTreeMap::new();
    let mut per_generation: BTreeMap<u32, BTreeMap<MotifId, usize>> = BTreeMap::new();
    for genome in genomes {
        let generation = genome.lineage.generation;
        for &m in &genome.motifs {
            *overall.entry(m).or_default() += 1;
            *per_generation.entry(generation).or_default().entry(m).or_default() += 1;
        }
    }
    let (total_instances, overall) = shares(&overall);
    let by_generation = per_generation
        .iter()
        .map(|(&generation, counts)| (generation, shares(counts).1))
        .collect();
    Ok(MakeupReport { total_instances, overall, by_generation })
}
