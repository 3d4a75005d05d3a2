//! Novelty search over microcircuit genomes: behaviours are archived for
//! being different, not for being good, under a dynamic admission threshold
//! and a complexity-driven pruning controller.

use rand::RngExt;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    pruning_controller, sparseness, PruningSettings, SearchError, ThresholdController,
    ThresholdSettings,
};
use crate::genome::{
    crossover, mutate, random_genome, tile, Lineage, MicrocircuitGenome, MutationMode,
    MutationRates,
};
use crate::metrics::distance_matrix;
use crate::motif::MotifSet;
use crate::rng::{stream, StreamDomain};
use crate::sim::{simulate, NeuronParams, SpikeTrain};
use crate::stimulus::StimulusProgram;

/// Full parameter set of a novelty-search run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoveltySettings {
    pub population_size: usize,
    pub generations: u32,
    /// Motifs per genome in the initial population.
    pub initial_motifs: usize,
    /// k of the k-nearest-neighbour sparseness.
    pub k_neighbours: usize,
    pub threshold: ThresholdSettings,
    pub pruning: PruningSettings,
    pub rates: MutationRates,
    /// Crossover slot bias towards the low-sparseness parent.
    pub ratio_low: f64,
    /// Wiring probability for generated edges.
    pub p_conn: f64,
    pub neuron: NeuronParams,
    /// Sample interval of the behaviour distance grid, ms.
    pub sample_dt: f64,
    pub seed: u64,
}

impl Default for NoveltySettings {
    fn default() -> Self {
        NoveltySettings {
            population_size: 100,
            generations: 50,
            initial_motifs: 2,
            k_neighbours: 100,
            threshold: ThresholdSettings::default(),
            pruning: PruningSettings::default(),
            rates: MutationRates::default(),
            ratio_low: 0.6,
            p_conn: 0.25,
            neuron: NeuronParams::default(),
            sample_dt: 0.5,
            seed: 0,
        }
    }
}

impl NoveltySettings {
    fn validate(&self) -> Result<(), SearchError> {
        let mut problems = Vec::new();
        if self.population_size < 2 {
            problems.push("population_size must be at least 2".to_string());
        }
        if self.generations < 1 {
            problems.push("generations must be at least 1".to_string());
        }
        if self.initial_motifs < 1 {
            problems.push("initial_motifs must be at least 1".to_string());
        }
        if self.k_neighbours < 1 {
            problems.push("k_neighbours must be at least 1".to_string());
        }
        if !(self.threshold.initial > 0.0 && self.threshold.initial <= 1.0) {
            problems.push(format!(
                "initial threshold {} outside (0, 1]",
                self.threshold.initial
            ));
        }
        if self.pruning.prune_end >= self.pruning.prune_start {
            problems.push(format!(
                "prune_end {} must be below prune_start {}",
                self.pruning.prune_end, self.pruning.prune_start
            ));
        }
        for (name, p) in [
            ("ratio_low", self.ratio_low),
            ("p_conn", self.p_conn),
            ("add_motif", self.rates.add_motif),
            ("remove_motif", self.rates.remove_motif),
            ("replace_motif", self.rates.replace_motif),
            ("reweight_edge", self.rates.reweight_edge),
            ("retarget_output", self.rates.retarget_output),
        ] {
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

/// One evaluated behaviour: the output trains of a genome on the stimulus.
#[derive(Debug, Clone, PartialEq)]
pub struct BehaviourRecord {
    pub genome_id: u64,
    /// Output spike trains, one per tap. The first drives the behaviour
    /// distance.
    pub outputs: Vec<SpikeTrain>,
    /// Sparseness p(x) at evaluation time.
    pub sparseness: f64,
    /// Generation the behaviour was evaluated in.
    pub generation: u32,
}

/// One admitted archive member.
#[derive(Debug, Clone, PartialEq)]
pub struct ArchiveEntry {
    pub genome: MicrocircuitGenome,
    pub behaviour: BehaviourRecord,
    /// Admission threshold in force when the entry was admitted.
    pub threshold_at_admission: f64,
}

/// The product of a novelty-search run: every admitted behaviour plus the
/// per-generation traces needed to audit and replay admissions.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NoveltyArchive {
    pub entries: Vec<ArchiveEntry>,
    /// Admission threshold in force per generation.
    pub threshold_history: Vec<f64>,
    /// Mutation mode in force per generation.
    pub mode_history: Vec<MutationMode>,
    /// Mean population complexity per generation.
    pub complexity_history: Vec<f64>,
}

impl NoveltyArchive {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Admission counts per generation, derived from the entries.
    pub fn admissions_per_generation(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.threshold_history.len()];
        for entry in &self.entries {
            counts[entry.behaviour.generation as usize] += 1;
        }
        counts
    }
}

struct Evaluated {
    genome: MicrocircuitGenome,
    outputs: Vec<SpikeTrain>,
}

fn evaluate_population(
    population: Vec<MicrocircuitGenome>,
    stimulus: &StimulusProgram,
    neuron: &NeuronParams,
) -> Result<Vec<Evaluated>, SearchError> {
    population
        .into_par_iter()
        .map(|genome| {
            let net = tile(&genome)?;
            let outputs = simulate(&net, &stimulus.trains, neuron)?;
            Ok(Evaluated { genome, outputs })
        })
        .collect()
}

/// Run novelty search and return the archive.
///
/// Per generation: simulate the population, compute sparseness over the
/// population plus the archived behaviours, admit at the current threshold,
/// then update the threshold and the pruning mode and breed the next
/// generation (full replacement). Deterministic for a given seed and
/// independent of thread count.
pub fn run_novelty_search(
    settings: &NoveltySettings,
    stimulus: &StimulusProgram,
    motif_set: &MotifSet,
) -> Result<NoveltyArchive, SearchError> {
    settings.validate()?;
    let pop_size = settings.population_size;

    let mut population: Vec<MicrocircuitGenome> = (0..pop_size)
        .into_par_iter()
        .map(|slot| {
            let mut rng = stream(settings.seed, StreamDomain::InitialPopulation, 0, slot as u64);
            let mut genome =
                random_genome(&mut rng, settings.initial_motifs, motif_set, settings.p_conn, 1)?;
            genome.id = slot as u64;
            Ok(genome)
        })
        .collect::<Result<_, SearchError>>()?;

    let mut archive = NoveltyArchive::default();
    let mut controller = ThresholdController::new(settings.threshold.clone());
    let mut mode = MutationMode::Normal;

    for generation in 0..settings.generations {
        let evaluated = evaluate_population(population, stimulus, &settings.neuron)?;

        // Behaviour pool: current population first, then the archive.
        let pool: Vec<SpikeTrain> = evaluated
            .iter()
            .map(|e| e.outputs[0].clone())
            .chain(archive.entries.iter().map(|e| e.behaviour.outputs[0].clone()))
            .collect();
        let matrix = distance_matrix(&pool, settings.sample_dt)?;
        let scores: Vec<f64> =
            (0..pop_size).map(|i| sparseness(i, &matrix, settings.k_neighbours)).collect();

        let threshold = controller.threshold();
        archive.threshold_history.push(threshold);
        let mut admissions = 0u32;
        for (i, e) in evaluated.iter().enumerate() {
            if scores[i] >= threshold {
                admissions += 1;
                archive.entries.push(ArchiveEntry {
                    genome: e.genome.clone(),
                    behaviour: BehaviourRecord {
                        genome_id: e.genome.id,
                        outputs: e.outputs.clone(),
                        sparseness: scores[i],
                        generation,
                    },
                    threshold_at_admission: threshold,
                });
            }
        }

        let mean =
            evaluated.iter().map(|e| e.genome.complexity()).sum::<usize>() as f64 / pop_size as f64;
        archive.complexity_history.push(mean);
        mode = pruning_controller(mean, mode, &settings.pruning);
        archive.mode_history.push(mode);

        controller.record_generation(admissions);

        if generation + 1 == settings.generations {
            break;
        }

        // Rank by sparseness, descending; ties resolved by slot order.
        let mut order: Vec<usize> = (0..pop_size).collect();
        order.sort_by(|&a, &b| {
            scores[b].partial_cmp(&scores[a]).expect("sparseness is finite").then(a.cmp(&b))
        });
        let quartile = (pop_size / 4).max(1);
        let top = &order[..quartile];
        let bottom = &order[pop_size - quartile..];

        population = (0..pop_size)
            .into_par_iter()
            .map(|slot| {
                let mut rng = stream(
                    settings.seed,
                    StreamDomain::Offspring,
                    generation as u64 + 1,
                    slot as u64,
                );
                let high = &evaluated[top[rng.random_range(0..quartile)]].genome;
                let low = &evaluated[bottom[rng.random_range(0..quartile)]].genome;
                let child = crossover(low, high, settings.ratio_low, settings.p_conn, &mut rng);
                let mut child =
                    mutate(&child, mode, &settings.rates, motif_set, settings.p_conn, &mut rng);
                child.id = (generation as u64 + 1) * pop_size as u64 + slot as u64;
                child.lineage = Lineage {
                    generation: generation + 1,
                    parents: vec![low.id, high.id],
                };
                child
            })
            .collect();
    }
    Ok(archive)
}
