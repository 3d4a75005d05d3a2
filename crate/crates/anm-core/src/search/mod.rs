//! The three search procedures: novelty search with a dynamic admission
//! threshold and a pruning controller, targeted evolution against an ideal
//! response, and the stimulus-optimisation EA.

mod novelty;
mod stimopt;
mod targeted;

pub use novelty::{
    run_novelty_search, ArchiveEntry, BehaviourRecord, NoveltyArchive, NoveltySettings,
};
pub use stimopt::{
    optimize_stimulus, stimulus_fitness, StimulusOptOutcome, StimulusOptSettings,
    SEPARABILITY_THRESHOLD,
};
pub use targeted::{evolve_targeted, targeted_fitness, TargetedOutcome, TargetedSettings};

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::{GenomeError, MutationMode};
use crate::metrics::{DistanceMatrix, MetricError};
use crate::sim::SimError;

/// Errors from the search engines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SearchError {
    #[error("invalid search settings: {0}")]
    BadSettings(String),
    #[error("target train duration {target} ms does not match stimulus duration {stimulus} ms")]
    TargetDurationMismatch { target: f64, stimulus: f64 },
    #[error(transparent)]
    Genome(#[from] GenomeError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Behavioural sparseness of one row of a distance matrix: the mean of the
/// `k` smallest distances to the other behaviours (all of them when fewer
/// than `k` exist; 0 when the matrix holds a single behaviour).
pub fn sparseness(index: usize, matrix: &DistanceMatrix, k: usize) -> f64 {
    let n = matrix.n();
    debug_assert!(index < n && k >= 1);
    if n < 2 {
        return 0.0;
    }
    let mut distances: Vec<f64> = (0..n).filter(|&j| j != index).map(|j| matrix.get(index, j)).collect();
    distances.sort_by(|a, b| a.partial_cmp(b).expect("distances are finite"));
    let take = k.min(distances.len());
    distances[..take].iter().sum::<f64>() / take as f64
}

/// Parameters of the dynamic admission threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdSettings {
    /// Threshold in force at generation 0.
    pub initial: f64,
    /// Stagnant generations (no admissions) before the threshold is lowered.
    pub stagnation_gens: u32,
    /// Admissions within the window that trigger a raise.
    pub burst_additions: u32,
    /// Length of the admission-counting window, in generations.
    pub burst_window: u32,
    pub lower_factor: f64,
    pub raise_factor: f64,
}

impl Default for ThresholdSettings {
    fn default() -> Self {
        ThresholdSettings {
            initial: 0.5,
            stagnation_gens: 20,
            burst_additions: 10,
            burst_window: 1,
            lower_factor: 0.95,
            raise_factor: 1.20,
        }
    }
}

/// One step of the threshold recurrence. The stagnation check wins when
/// both conditions hold.
pub fn threshold_update(
    threshold: f64,
    gens_without_addition: u32,
    additions_in_window: u32,
    settings: &ThresholdSettings,
) -> f64 {
    if gens_without_addition >= settings.stagnation_gens {
        threshold * settings.lower_factor
    } else if additions_in_window >= settings.burst_additions {
        threshold * settings.raise_factor
    } else {
        threshold
    }
}

/// Stateful driver of the threshold recurrence: feed it one admission count
/// per generation; it tracks the stagnation counter and the admission
/// window, resetting each on its own trigger.
#[derive(Debug, Clone)]
pub struct ThresholdController {
    settings: ThresholdSettings,
    threshold: f64,
    gens_without_addition: u32,
    window: VecDeque<u32>,
}

impl ThresholdController {
    pub fn new(settings: ThresholdSettings) -> Self {
        let threshold = settings.initial;
        ThresholdController {
            settings,
            threshold,
            gens_without_addition: 0,
            window: VecDeque::new(),
        }
    }

    /// Threshold currently in force.
    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    /// Record one finished generation and return the threshold in force for
    /// the next one.
    pub fn record_generation(&mut self, admissions: u32) -> f64 {
        if admissions == 0 {
            self.gens_without_addition += 1;
        } else {
            self.gens_without_addition = 0;
        }
        self.window.push_back(admissions);
        while self.window.len() > self.settings.burst_window as usize {
            self.window.pop_front();
        }
        let in_window: u32 = self.window.iter().sum();

        let stagnated = self.gens_without_addition >= self.settings.stagnation_gens;
        self.threshold =
            threshold_update(self.threshold, self.gens_without_addition, in_window, &self.settings);
        if stagnated {
            self.gens_without_addition = 0;
        } else if in_window >= self.settings.burst_additions {
            self.window.clear();
        }
        self.threshold
    }
}

/// Mean-complexity bounds of the pruning hysteresis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruningSettings {
    /// Entering pruning at or above this mean complexity.
    pub prune_start: f64,
    /// Leaving pruning at or below this mean complexity.
    pub prune_end: f64,
}

impl Default for PruningSettings {
    fn default() -> Self {
        PruningSettings { prune_start: 60.0, prune_end: 40.0 }
    }
}

/// One step of the pruning-mode state machine.
pub fn pruning_controller(
    mean_complexity: f64,
    current: MutationMode,
    settings: &PruningSettings,
) -> MutationMode {
    match current {
        MutationMode::Normal if mean_complexity >= settings.prune_start => MutationMode::Pruning,
        MutationMode::Pruning if mean_complexity <= settings.prune_end => MutationMode::Normal,
        mode => mode,
    }
}
