//! Targeted evolution: minimise the distance between a microcircuit's
//! output and a target spike train, typically an ideal response.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SearchError;
use crate::genome::{
    crossover, mutate, random_genome, tile, Lineage, MicrocircuitGenome, MutationMode,
    MutationRates,
};
use crate::metrics::spike_distance;
use crate::motif::MotifSet;
use crate::rng::{stream, StreamDomain};
use crate::sim::{simulate, NeuronParams, SpikeTrain};
use crate::stimulus::StimulusProgram;

/// Parameters of a targeted-evolution run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetedSettings {
    pub population_size: usize,
    pub generations: u32,
    /// Stop early once the best distance reaches this value.
    pub goal: f64,
    /// Motifs per genome in the initial population.
    pub initial_motifs: usize,
    pub rates: MutationRates,
    pub ratio_low: f64,
    pub p_conn: f64,
    pub neuron: NeuronParams,
    pub sample_dt: f64,
    pub seed: u64,
}

impl Default for TargetedSettings {
    fn default() -> Self {
        TargetedSettings {
            population_size: 20,
            generations: 30,
            goal: 0.0,
            initial_motifs: 2,
            rates: MutationRates::default(),
            ratio_low: 0.6,
            p_conn: 0.25,
            neuron: NeuronParams::default(),
            sample_dt: 0.5,
            seed: 0,
        }
    }
}

impl TargetedSettings {
    fn validate(&self) -> Result<(), SearchError> {
        let mut problems = Vec::new();
        if self.population_size < 2 {
            problems.push("population_size must be at least 2".to_string());
        }
        if self.initial_motifs < 1 {
            problems.push("initial_motifs must be at least 1".to_string());
        }
        if !(self.goal.is_finite() && self.goal >= 0.0) {
            problems.push(format!("goal {} must be non-negative", self.goal));
        }
        for (name, p) in [("ratio_low", self.ratio_low), ("p_conn", self.p_conn)] {
            if !(p.is_finite() && (0.0..=1.0).contains(&p)) {
                problems.push(format!("{name} {p} outside [0, 1]"));
            }
        }
        if !(self.sample_dt.is_finite() && self.sample_dt > 0.0) {
            problems.push(format!("sample_dt {} must be positive", self.sample_dt));
        }
        if let Err(e) = self.neuron.validate() {
            problems.push(e.to_string());
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SearchError::BadSettings(problems.join("; ")))
        }
    }
}

/// Result of a targeted-evolution run.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetedOutcome {
    pub best: MicrocircuitGenome,
    pub best_fitness: f64,
    /// Best distance in each evaluated generation, starting with the
    /// initial population. Non-increasing under elitism.
    pub trace: Vec<f64>,
}

/// Distance between a genome's first output on the stimulus and the target
/// train. Lower is better; 0 means the output matches the target.
pub fn targeted_fitness(
    genome: &MicrocircuitGenome,
    stimulus: &StimulusProgram,
    target: &SpikeTrain,
    neuron: &NeuronParams,
    sample_dt: f64,
) -> Result<f64, SearchError> {
    if target.duration_ms() != stimulus.duration_ms {
        return Err(SearchError::TargetDurationMismatch {
            target: target.duration_ms(),
            stimulus: stimulus.duration_ms,
        });
    }
    let net = tile(genome)?;
    let outputs = simulate(&net, &stimulus.trains, neuron)?;
    Ok(spike_distance(&outputs[0], target, sample_dt)?)
}

fn evaluate(
    population: &[MicrocircuitGenome],
    stimulus: &StimulusProgram,
    target: &SpikeTrain,
    neuron: &NeuronParams,
    sample_dt: f64,
) -> Result<Vec<f64>, SearchError> {
    population
        .par_iter()
        .map(|g| targeted_fitness(g, stimulus, target, neuron, sample_dt))
        .collect()
}

/// Evolve a microcircuit whose output approaches `target`. Keeps the best
/// individual each generation (elitism); parents are drawn from the top
/// quartile by fitness, with the fitter parent taking the `parent_low` role
/// of the crossover. Stops at the generation cap or once the best distance
/// reaches `settings.goal`.
pub fn evolve_targeted(
    settings: &TargetedSettings,
    stimulus: &StimulusProgram,
    target: &SpikeTrain,
    motif_set: &MotifSet,
) -> Result<TargetedOutcome, SearchError> {
    settings.validate()?;
    let pop_size = settings.population_size;

    let mut population: Vec<MicrocircuitGenome> = (0..pop_size)
        .into_par_iter()
        .map(|slot| {
            let mut rng = stream(settings.seed, StreamDomain::TargetedInit, 0, slot as u64);
            let mut genome =
                random_genome(&mut rng, settings.initial_motifs, motif_set, settings.p_conn, 1)?;
            genome.id = slot as u64;
            Ok(genome)
        })
        .collect::<Result<_, SearchError>>()?;
    let mut fitness =
        evaluate(&population, stimulus, target, &settings.neuron, settings.sample_dt)?;

    let best_of = |fitness: &[f64]| -> usize {
        (0..fitness.len())
            .min_by(|&a, &b| fitness[a].partial_cmp(&fitness[b]).expect("finite").then(a.cmp(&b)))
            .expect("population is non-empty")
    };
    let mut trace = vec![fitness[best_of(&fitness)]];

    for generation in 1..=settings.generations {
        if *trace.last().expect("trace is non-empty") <= settings.goal {
            break;
        }

        // Rank ascending: lower distance is fitter.
        let mut order: Vec<usize> = (0..pop_size).collect();
        order.sort_by(|&a, &b| {
            fitness[a].partial_cmp(&fitness[b]).expect("finite").then(a.cmp(&b))
        });
        let quartile = (pop_size / 4).max(1);
        let elite_index = order[0];
        let elite = population[elite_index].clone();
        let elite_fitness = fitness[elite_index];

        let children: Vec<MicrocircuitGenome> = (1..pop_size)
            .into_par_iter()
            .map(|slot| {
                let mut rng = stream(
                    settings.seed,
                    StreamDomain::TargetedChild,
                    generation as u64,
                    slot as u64,
                );
                let a = order[rng.random_range(0..quartile)];
                let b = order[rng.random_range(0..quartile)];
                // The fitter pick takes the favoured parent_low role.
                let (low, high) = if (fitness[a], a) <= (fitness[b], b) {
                    (&population[a], &population[b])
                } else {
                    (&population[b], &population[a])
                };
                let child = crossover(low, high, settings.ratio_low, settings.p_conn, &mut rng);
                let mut child = mutate(
                    &child,
                    MutationMode::Normal,
                    &settings.rates,
                    motif_set,
                    settings.p_conn,
                    &mut rng,
                );
                child.id = generation as u64 * pop_size as u64 + slot as u64;
                child.lineage = Lineage { generation, parents: vec![low.id, high.id] };
                child
            })
            .collect();

        let child_fitness =
            evaluate(&children, stimulus, target, &settings.neuron, settings.sample_dt)?;
        population = std::iter::once(elite).chain(children).collect();
        fitness = std::iter::once(elite_fitness).chain(child_fitness).collect();
        trace.push(fitness[best_of(&fitness)]);
    }

    let best_index = best_of(&fitness);
    Ok(TargetedOutcome {
        best: population[best_index].clone(),
        best_fitness: fitness[best_index],
        trace,
    })
}
