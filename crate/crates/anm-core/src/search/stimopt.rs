//! Stimulus optimisation: evolve a pattern sequence whose ideal responses
//! are as mutually distant — as separable — as possible.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::metrics::MetricError;
use crate::rng::{stream, StreamDomain};
use crate::stimulus::{encode_patterns, ideal_responses, EncodingParams, StimulusProgram};

/// Distance at or above which an ideal-response pair counts as separable.
pub const SEPARABILITY_THRESHOLD: f64 = 0.5;

/// Parameters of a stimulus-optimisation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusOptSettings {
    pub population_size: usize,
    pub generations: u32,
    /// Bounds on the pattern-sequence length, inclusive.
    pub min_length: usize,
    pub max_length: usize,
    /// Share of the population carried over unchanged each generation.
    pub elite_fraction: f64,
    /// Per-pattern probability of replacement in a child.
    pub pattern_mutation: f64,
    pub encoding: EncodingParams,
    pub sample_dt: f64,
    pub seed: u64,
}

impl Default for StimulusOptSettings {
    fn default() -> Self {
        StimulusOptSettings {
            population_size: 10,
            generations: 100,
            min_length: 255,
            max_length: 5100,
            elite_fraction: 0.25,
            pattern_mutation: 0.15,
            encoding: EncodingParams::default(),
            sample_dt: 0.5,
            seed: 0,
        }
    }
}

impl StimulusOptSettings {
    fn validate(&self) -> Result<(), SearchError> {
        let mut problems = Vec::new();
        if self.population_size < 2 {
            problems.push("population_size must be at least 2".to_string());
        }
        if self.min_length < 1 || self.min_length > self.max_length {
            problems.push(format!(
                "length bounds [{}, {}] are not sane",
                self.min_length, self.max_length
            ));
        }
        if !(self.elite_fraction > 0.0 && self.elite_fraction <= 1.0) {
            problems.push(format!("elite_fraction {} outside (0, 1]", self.elite_fraction));
        }
        if !(self.pattern_mutation.is_finite() && (0.0..=1.0).contains(&self.pattern_mutation)) {
            problems.push(format!("pattern_mutation {} outside [0, 1]", self.pattern_mutation));
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            problems.push(format!("sample_dt {} must be positive", self.sample_dt));
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SearchError::BadSettings(problems.join("; ")))
        }
    }

    fn elite_count(&self) -> usize {
        ((self.population_size as f64 * self.elite_fraction).floor() as usize)
            .max(1)
            .min(self.population_size)
    }
}

/// Result of a stimulus-optimisation run.
#[derive(Debug, Clone)]
pub struct StimulusOptOutcome {
    pub best: StimulusProgram,
    /// Mean off-diagonal ideal-response distance of the best individual.
    pub best_fitness: f64,
    /// Separable pairs (distance >= 0.5) of the best individual.
    pub best_over_threshold: usize,
    /// Best (fitness, over-threshold count) per generation, starting with
    /// the initial population. Fitness is non-decreasing under elitism.
    pub trace: Vec<(f64, usize)>,
}

/// Separability fitness of a stimulus: the mean off-diagonal distance
/// between the ideal responses of its distinct patterns, plus the number of
/// pairs at or above [`SEPARABILITY_THRESHOLD`]. An alphabet of fewer than
/// two patterns scores 0.
pub fn stimulus_fitness(
    program: &StimulusProgram,
    sample_dt: f64,
) -> Result<(f64, usize), MetricError> {
    if program.alphabet().len() < 2 {
        return Ok((0.0, 0));
    }
    let ideals = ideal_responses(program);
    let trains: Vec<_> = ideals.into_values().collect();
    let matrix = crate::metrics::distance_matrix(&trains, sample_dt)?;
    Ok((matrix.off_diagonal_mean(), matrix.pairs_over(SEPARABILITY_THRESHOLD)))
}

#[derive(Clone)]
struct Individual {
    patterns: Vec<u8>,
    fitness: f64,
    over: usize,
}

fn random_patterns<R: rand::Rng>(rng: &mut R, min: usize, max: usize) -> Vec<u8> {
    let length = rng.random_range(min..=max);
    (0..length).map(|_| rng.random_range(1..=255u8)).collect()
}

/// Symmetrical crossover: the child's first half samples the first parent's
/// prefix half, the second half samples the second parent's suffix half,
/// both scaled proportionally to the child's freshly drawn length.
fn splice(parent1: &[u8], parent2: &[u8], child_len: usize) -> Vec<u8> {
    let first_len = child_len / 2;
    let second_len = child_len - first_len;
    let prefix = &parent1[..parent1.len().div_ceil(2)];
    let suffix = &parent2[parent2.len() / 2..];
    let mut child = Vec::with_capacity(child_len);
    for i in 0..first_len {
        child.push(prefix[i * prefix.len() / first_len]);
    }
    for j in 0..second_len {
        child.push(suffix[j * suffix.len() / second_len]);
    }
    child
}

fn evaluate(
    patterns: &[Vec<u8>],
    encoding: &EncodingParams,
    sample_dt: f64,
) -> Result<Vec<Individual>, SearchError> {
    patterns
        .par_iter()
        .map(|p| {
            let program = encode_patterns(p, encoding).map_err(|e| {
                SearchError::BadSettings(format!("generated stimulus failed to encode: {e}"))
            })?;
            let (fitness, over) = stimulus_fitness(&program, sample_dt)?;
            Ok(Individual { patterns: p.clone(), fitness, over })
        })
        .collect()
}

/// Evolve a stimulus whose ideal responses are maximally separable.
/// Each generation keeps the top `elite_fraction` unchanged — their cached
/// fitness is reused, never recomputed — and fills the rest with spliced,
/// mutated children of two uniformly drawn elites.
pub fn optimize_stimulus(settings: &StimulusOptSettings) -> Result<StimulusOptOutcome, SearchError> {
    settings.validate()?;
    let pop_size = settings.population_size;
    let elite_count = settings.elite_count();

    let initial: Vec<Vec<u8>> = (0..pop_size)
        .map(|slot| {
            let mut rng = stream(settings.seed, StreamDomain::StimulusInit, 0, slot as u64);
            random_patterns(&mut rng, settings.min_length, settings.max_length)
        })
        .collect();
    let mut population = evaluate(&initial, &settings.encoding, settings.sample_dt)?;

    let rank = |population: &[Individual]| -> Vec<usize> {
        let mut order: Vec<usize> = (0..population.len()).collect();
        order.sort_by(|&a, &b| {
            population[b]
                .fitness
                .partial_cmp(&population[a].fitness)
                .expect("fitness is finite")
                .then(a.cmp(&b))
        });
        order
    };

    let mut trace = Vec::with_capacity(settings.generations as usize + 1);
    let best = rank(&population)[0];
    trace.push((population[best].fitness, population[best].over));

    for generation in 1..=settings.generations {
        let order = rank(&population);
        let elites: Vec<Individual> =
            order[..elite_count].iter().map(|&i| population[i].clone()).collect();

        let child_patterns: Vec<Vec<u8>> = (0..pop_size - elite_count)
            .map(|slot| {
                let mut rng = stream(
                    settings.seed,
                    StreamDomain::StimulusChild,
                    generation as u64,
                    slot as u64,
                );
                let p1 = &elites[rng.random_range(0..elite_count)];
                let p2 = &elites[rng.random_range(0..elite_count)];
                let child_len = rng.random_range(settings.min_length..=settings.max_length);
                let mut child = splice(&p1.patterns, &p2.patterns, child_len);
                for pattern in &mut child {
                    if rng.random::<f64>() < settings.pattern_mutation {
                        *pattern = rng.random_range(1..=255u8);
                    }
                }
                child
            })
            .collect();
        let children = evaluate(&child_patterns, &settings.encoding, settings.sample_dt)?;
        population = elites.into_iter().chain(children).collect();

        let best = rank(&population)[0];
        trace.push((population[best].fitness, population[best].over));
    }

    let best = &population[rank(&population)[0]];
    let program = encode_patterns(&best.patterns, &settings.encoding)
        .expect("best individual was encoded before");
    Ok(StimulusOptOutcome {
        best: program,
        best_fitness: best.fitness,
        best_over_threshold: best.over,
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stimulus::encode_text;

    fn tiny(seed: u64) -> StimulusOptSettings {
        StimulusOptSettings {
            population_size: 4,
            generations: 3,
            min_length: 4,
            max_length: 12,
            seed,
            ..StimulusOptSettings::default()
        }
    }

    #[test]
    fn fitness_of_uniform_stimulus_is_zero() {
        let program = encode_text("AAAA", &EncodingParams::default()).unwrap();
        assert_eq!(stimulus_fitness(&program, 0.5).unwrap(), (0.0, 0));
    }

    #[test]
    fn fitness_of_two_patterns_is_their_pair_distance() {
        let program = encode_text("AB", &EncodingParams::default()).unwrap();
        let (fitness, over) = stimulus_fitness(&program, 0.5).unwrap();
        let ideals = ideal_responses(&program);
        let expected = crate::metrics::spike_distance(&ideals[&0x41], &ideals[&0x42], 0.5).unwrap();
        assert_eq!(fitness.to_bits(), expected.to_bits());
        assert_eq!(over, usize::from(expected >= SEPARABILITY_THRESHOLD));
    }

    #[test]
    fn splice_respects_child_length_and_sources() {
        let p1 = vec![1u8; 10];
        let p2 = vec![2u8; 20];
        let child = splice(&p1, &p2, 9);
        assert_eq!(child.len(), 9);
        assert!(child[..4].iter().all(|&p| p == 1));
        assert!(child[4..].iter().all(|&p| p == 2));
    }

    #[test]
    fn lengths_stay_in_bounds_and_trace_is_monotone() {
        let settings = tiny(5);
        let outcome = optimize_stimulus(&settings).unwrap();
        assert_eq!(outcome.trace.len(), 4);
        for pair in outcome.trace.windows(2) {
            assert!(pair[1].0 >= pair[0].0);
        }
        let len = outcome.best.patterns.len();
        assert!((settings.min_length..=settings.max_length).contains(&len));
        assert!(outcome.best.patterns.iter().all(|&p| p != 0));
    }

    #[test]
    fn run_is_deterministic() {
        let a = optimize_stimulus(&tiny(8)).unwrap();
        let b = optimize_stimulus(&tiny(8)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best.patterns, b.best.patterns);
        let c = optimize_stimulus(&tiny(9)).unwrap();
        assert!(a.best.patterns != c.best.patterns || a.trace != c.trace);
    }

    #[test]
    fn settings_validation() {
        let mut s = tiny(0);
        s.min_length = 20;
        s.max_length = 10;
        assert!(matches!(optimize_stimulus(&s), Err(SearchError::BadSettings(_))));
        let mut s = tiny(0);
        s.elite_fraction = 0.0;
        assert!(matches!(optimize_stimulus(&s), Err(SearchError::BadSettings(_))));
    }
}
