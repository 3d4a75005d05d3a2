//! Microcircuit genomes: an ordered list of motif instances plus the sparse
//! wiring between them, with the operators that grow, recombine, and mutate
//! that wiring.
//!
//! Neurons are addressed globally by concatenating motif blocks in list
//! order. Inter-motif edges run from a designated output of one motif to a
//! designated input of a different motif; input edges run from one of the
//! eight external channels to a designated input. Output taps name the
//! designated outputs whose spike trains a simulation reports.

use rand::{Rng, RngExt};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::motif::{template, MotifId, MotifSet};
use crate::sim::INPUT_CHANNELS;

/// An inter-motif synapse between globally indexed neurons.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub source: usize,
    pub dest: usize,
    pub weight: f64,
}

/// A synapse from an external input channel to a globally indexed neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InputEdge {
    pub channel: usize,
    pub dest: usize,
    pub weight: f64,
}

/// Ancestry bookkeeping carried by every genome.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Lineage {
    /// Generation the genome was created in (0 for initial populations).
    pub generation: u32,
    /// Ids of the parents it was derived from (empty for initial genomes).
    pub parents: Vec<u64>,
}

/// A complete microcircuit genome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MicrocircuitGenome {
    pub id: u64,
    /// Motif instances in block order.
    pub motifs: Vec<MotifId>,
    /// Sorted by `(source, dest)`.
    pub inter_motif_edges: Vec<Edge>,
    /// Sorted by `(channel, dest)`.
    pub input_edges: Vec<InputEdge>,
    /// Global indices of the neurons whose spikes form the outputs.
    pub output_taps: Vec<usize>,
    pub lineage: Lineage,
}

/// Errors from genome validation and construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenomeError {
    #[error("genome must contain at least one motif")]
    EmptyMotifs,
    #[error("edge source {0} is not a designated output neuron")]
    SourceNotOutput(usize),
    #[error("edge dest {0} is not a designated input neuron")]
    DestNotInput(usize),
    #[error("edge {0} -> {1} must connect two different motifs")]
    SameMotif(usize, usize),
    #[error("edge weight {0} must be finite, non-zero, and within [-1, 1]")]
    BadWeight(f64),
    #[error("input channel {0} out of range (0..{INPUT_CHANNELS})")]
    BadChannel(usize),
    #[error("output tap {0} is not a designated output neuron")]
    BadTap(usize),
    #[error("duplicate edge {0} -> {1}")]
    DuplicateEdge(usize, usize),
    #[error("duplicate input edge: channel {0} -> {1}")]
    DuplicateInputEdge(usize, usize),
    #[error("connection probability {0} must lie in [0, 1]")]
    BadProbability(f64),
    #[error("at least one output tap is required")]
    NoTaps,
    #[error("mean complexity of an empty population is undefined")]
    EmptyPopulation,
}

/// Block offsets of a motif list.
struct Layout {
    offsets: Vec<usize>,
    total: usize,
}

impl Layout {
    fn of(motifs: &[MotifId]) -> Layout {
        let mut offsets = Vec::with_capacity(motifs.len());
        let mut total = 0;
        for &m in motifs {
            offsets.push(total);
            total += template(m).size;
        }
        Layout { offsets, total }
    }

    /// Slot index of the motif containing a global neuron index.
    fn slot_of(&self, neuron: usize) -> usize {
        debug_assert!(neuron < self.total);
        self.offsets.partition_point(|&o| o <= neuron) - 1
    }
}

impl MicrocircuitGenome {
    /// Total neuron count across all motif blocks.
    pub fn neuron_count(&self) -> usize {
        self.motifs.iter().map(|&m| template(m).size).sum()
    }

    /// Global index of the first neuron of each motif block.
    pub fn block_offsets(&self) -> Vec<usize> {
        Layout::of(&self.motifs).offsets
    }

    /// Slot index of the motif block containing a global neuron index.
    pub fn motif_of(&self, neuron: usize) -> usize {
        Layout::of(&self.motifs).slot_of(neuron)
    }

    /// Sorted global indices of all designated input neurons.
    pub fn designated_inputs(&self) -> Vec<usize> {
        let layout = Layout::of(&self.motifs);
        self.motifs
            .iter()
            .zip(&layout.offsets)
            .flat_map(|(&m, &off)| template(m).inputs.iter().map(move |&i| off + i))
            .collect()
    }

    /// Sorted global indices of all designated output neurons.
    pub fn designated_outputs(&self) -> Vec<usize> {
        let layout = Layout::of(&self.motifs);
        self.motifs
            .iter()
            .zip(&layout.offsets)
            .flat_map(|(&m, &off)| template(m).outputs.iter().map(move |&o| off + o))
            .collect()
    }

    /// Check every structural invariant.
    pub fn validate(&self) -> Result<(), GenomeError> {
        if self.motifs.is_empty() {
            return Err(GenomeError::EmptyMotifs);
        }
        if self.output_taps.is_empty() {
            return Err(GenomeError::NoTaps);
        }
        let layout = Layout::of(&self.motifs);
        let inputs = self.designated_inputs();
        let outputs = self.designated_outputs();
        let is_input = |n: usize| inputs.binary_search(&n).is_ok();
        let is_output = |n: usize| outputs.binary_search(&n).is_ok();
        let weight_ok = |w: f64| w.is_finite() && w != 0.0 && (-1.0..=1.0).contains(&w);

        for (k, e) in self.inter_motif_edges.iter().enumerate() {
            if e.source >= layout.total || !is_output(e.source) {
                return Err(GenomeError::SourceNotOutput(e.source));
            }
            if e.dest >= layout.total || !is_input(e.dest) {
                return Err(GenomeError::DestNotInput(e.dest));
            }
            if layout.slot_of(e.source) == layout.slot_of(e.dest) {
                return Err(GenomeError::SameMotif(e.source, e.dest));
            }
            if !weight_ok(e.weight) {
                return Err(GenomeError::BadWeight(e.weight));
            }
            if self.inter_motif_edges[..k]
                .iter()
                .any(|p| p.source == e.source && p.dest == e.dest)
            {
                return Err(GenomeError::DuplicateEdge(e.source, e.dest));
            }
        }
        for (k, e) in self.input_edges.iter().enumerate() {
            if e.channel >= INPUT_CHANNELS {
                return Err(GenomeError::BadChannel(e.channel));
            }
            if e.dest >= layout.total || !is_input(e.dest) {
                return Err(GenomeError::DestNotInput(e.dest));
            }
            if !weight_ok(e.weight) {
                return Err(GenomeError::BadWeight(e.weight));
            }
            if self.input_edges[..k]
                .iter()
                .any(|p| p.channel == e.channel && p.dest == e.dest)
            {
                return Err(GenomeError::DuplicateInputEdge(e.channel, e.dest));
            }
        }
        for &tap in &self.output_taps {
            if tap >= layout.total || !is_output(tap) {
                return Err(GenomeError::BadTap(tap));
            }
        }
        Ok(())
    }

    /// Structural complexity: neuron count plus total edge count, where
    /// edges comprise template synapses, inter-motif edges, input edges,
    /// and output taps.
    pub fn complexity(&self) -> usize {
        let neurons = self.neuron_count();
        let template_edges: usize = self.motifs.iter().map(|&m| template(m).edge_count()).sum();
        neurons
            + template_edges
            + self.inter_motif_edges.len()
            + self.input_edges.len()
            + self.output_taps.len()
    }
}

/// Mean complexity of a population.
pub fn mean_complexity(population: &[MicrocircuitGenome]) -> Result<f64, GenomeError> {
    if population.is_empty() {
        return Err(GenomeError::EmptyPopulation);
    }
    let total: usize = population.iter().map(|g| g.complexity()).sum();
    Ok(total as f64 / population.len() as f64)
}

/// A genome expanded to dense weight matrices, ready for simulation.
#[derive(Debug, Clone, PartialEq)]
pub struct TiledNetwork {
    pub neuron_count: usize,
    /// Row-major: `weights[from * neuron_count + to]`.
    pub weights: Vec<f64>,
    /// Row-major: `input_weights[channel * neuron_count + to]`.
    pub input_weights: Vec<f64>,
    pub output_taps: Vec<usize>,
}

impl TiledNetwork {
    pub fn weight(&self, from: usize, to: usize) -> f64 {
        self.weights[from * self.neuron_count + to]
    }

    pub fn input_weight(&self, channel: usize, to: usize) -> f64 {
        self.input_weights[channel * self.neuron_count + to]
    }
}

/// Expand a genome into dense weight matrices. Template synapses keep their
/// sign at unit magnitude; genome edges carry their own weights.
pub fn tile(genome: &MicrocircuitGenome) -> Result<TiledNetwork, GenomeError> {
    genome.validate()?;
    let layout = Layout::of(&genome.motifs);
    let n = layout.total;
    let mut weights = vec![0.0; n * n];
    for (&m, &off) in genome.motifs.iter().zip(&layout.offsets) {
        for (from, to, sign) in template(m).edges() {
            weights[(off + from) * n + (off + to)] = sign as f64;
        }
    }
    for e in &genome.inter_motif_edges {
        weights[e.source * n + e.dest] = e.weight;
    }
    let mut input_weights = vec![0.0; INPUT_CHANNELS * n];
    for e in &genome.input_edges {
        input_weights[e.channel * n + e.dest] = e.weight;
    }
    Ok(TiledNetwork {
        neuron_count: n,
        weights,
        input_weights,
        output_taps: genome.output_taps.clone(),
    })
}

/// Draw a uniform non-zero weight from `[-1, 1]`.
fn sample_weight<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let w: f64 = rng.random_range(-1.0..=1.0);
        if w != 0.0 {
            return w;
        }
    }
}

fn check_probability(p: f64) -> Result<(), GenomeError> {
    if p.is_finite() && (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(GenomeError::BadProbability(p))
    }
}

fn sort_edges(genome: &mut MicrocircuitGenome) {
    genome
        .inter_motif_edges
        .sort_by_key(|e| (e.source, e.dest));
    genome.input_edges.sort_by_key(|e| (e.channel, e.dest));
}

/// Generate a random genome with `motif_count` motifs drawn uniformly from
/// `set`, wiring every designated inter-motif pair and every channel/input
/// pair independently with probability `p_conn`. `output_count` taps are
/// drawn uniformly from the designated outputs.
///
/// The caller assigns `id` and `lineage`; both start zeroed.
pub fn random_genome<R: Rng>(
    rng: &mut R,
    motif_count: usize,
    set: &MotifSet,
    p_conn: f64,
    output_count: usize,
) -> Result<MicrocircuitGenome, GenomeError> {
    if motif_count == 0 {
        return Err(GenomeError::EmptyMotifs);
    }
    if output_count == 0 {
        return Err(GenomeError::NoTaps);
    }
    check_probability(p_conn)?;

    let motifs: Vec<MotifId> = (0..motif_count)
        .map(|_| set.ids()[rng.random_range(0..set.len())])
        .collect();
    let layout = Layout::of(&motifs);

    let mut inter_motif_edges = Vec::new();
    for src_slot in 0..motif_count {
        for dst_slot in 0..motif_count {
            if src_slot == dst_slot {
                continue;
            }
            for &o in template(motifs[src_slot]).outputs {
                for &i in template(motifs[dst_slot]).inputs {
                    if rng.random::<f64>() < p_conn {
                        inter_motif_edges.push(Edge {
                            source: layout.offsets[src_slot] + o,
                            dest: layout.offsets[dst_slot] + i,
                            weight: sample_weight(rng),
                        });
                    }
                }
            }
        }
    }

    let mut input_edges = Vec::new();
    for channel in 0..INPUT_CHANNELS {
        for slot in 0..motif_count {
            for &i in template(motifs[slot]).inputs {
                if rng.random::<f64>() < p_conn {
                    input_edges.push(InputEdge {
                        channel,
                        dest: layout.offsets[slot] + i,
                        weight: sample_weight(rng),
                    });
                }
            }
        }
    }

    let mut genome = MicrocircuitGenome {
        id: 0,
        motifs,
        inter_motif_edges,
        input_edges,
        output_taps: Vec::new(),
        lineage: Lineage::default(),
    };
    let outputs = genome.designated_outputs();
    genome.output_taps = (0..output_count)
        .map(|_| outputs[rng.random_range(0..outputs.len())])
        .collect();
    sort_edges(&mut genome);
    debug_assert_eq!(genome.validate(), Ok(()));
    Ok(genome)
}

/// Recombine two parents. Each of the child's motif slots is filled from
/// `parent_low` with probability `ratio_low`, otherwise from `parent_high`,
/// copying a uniformly chosen motif instance of that parent together with
/// its input-channel edges. Inter-motif edges are inherited where both slots
/// came from the same parent (between the two original instances) and
/// regenerated at `p_conn` otherwise. Output taps follow `parent_low` where
/// still valid and are resampled otherwise.
///
/// The child's motif count is the rounded mean of the parents' counts (at
/// least one). Its `id` is left 0 for the caller to assign.
pub fn crossover<R: Rng>(
    parent_low: &MicrocircuitGenome,
    parent_high: &MicrocircuitGenome,
    ratio_low: f64,
    p_conn: f64,
    rng: &mut R,
) -> MicrocircuitGenome {
    #[derive(Clone, Copy)]
    struct SlotSource {
        from_low: bool,
        instance: usize,
    }

    let count = (((parent_low.motifs.len() + parent_high.motifs.len()) as f64) / 2.0)
        .round()
        .max(1.0) as usize;

    let slots: Vec<SlotSource> = (0..count)
        .map(|_| {
            let from_low = rng.random::<f64>() < ratio_low;
            let parent = if from_low { parent_low } else { parent_high };
            SlotSource { from_low, instance: rng.random_range(0..parent.motifs.len()) }
        })
        .collect();

    let motifs: Vec<MotifId> = slots
        .iter()
        .map(|s| {
            let parent = if s.from_low { parent_low } else { parent_high };
            parent.motifs[s.instance]
        })
        .collect();
    let layout = Layout::of(&motifs);
    let low_layout = Layout::of(&parent_low.motifs);
    let high_layout = Layout::of(&parent_high.motifs);

    // Input-channel edges travel with each copied motif instance.
    let mut input_edges = Vec::new();
    for (slot, src) in slots.iter().enumerate() {
        let (parent, parent_layout) = if src.from_low {
            (parent_low, &low_layout)
        } else {
            (parent_high, &high_layout)
        };
        let block_start = parent_layout.offsets[src.instance];
        for e in &parent.input_edges {
            if parent_layout.slot_of(e.dest) == src.instance {
                input_edges.push(InputEdge {
                    channel: e.channel,
                    dest: layout.offsets[slot] + (e.dest - block_start),
                    weight: e.weight,
                });
            }
        }
    }

    let mut inter_motif_edges = Vec::new();
    for s1 in 0..count {
        for s2 in 0..count {
            if s1 == s2 {
                continue;
            }
            if slots[s1].from_low == slots[s2].from_low {
                let (parent, parent_layout) = if slots[s1].from_low {
                    (parent_low, &low_layout)
                } else {
                    (parent_high, &high_layout)
                };
                let (k1, k2) = (slots[s1].instance, slots[s2].instance);
                if k1 == k2 {
                    continue;
                }
                for e in &parent.inter_motif_edges {
                    if parent_layout.slot_of(e.source) == k1 && parent_layout.slot_of(e.dest) == k2
                    {
                        inter_motif_edges.push(Edge {
                            source: layout.offsets[s1] + (e.source - parent_layout.offsets[k1]),
                            dest: layout.offsets[s2] + (e.dest - parent_layout.offsets[k2]),
                            weight: e.weight,
                        });
                    }
                }
            } else {
                for &o in template(motifs[s1]).outputs {
                    for &i in template(motifs[s2]).inputs {
                        if rng.random::<f64>() < p_conn {
                            inter_motif_edges.push(Edge {
                                source: layout.offsets[s1] + o,
                                dest: layout.offsets[s2] + i,
                                weight: sample_weight(rng),
                            });
                        }
                    }
                }
            }
        }
    }

    let mut child = MicrocircuitGenome {
        id: 0,
        motifs,
        inter_motif_edges,
        input_edges,
        output_taps: Vec::new(),
        lineage: Lineage {
            generation: parent_low.lineage.generation.max(parent_high.lineage.generation) + 1,
            parents: vec![parent_low.id, parent_high.id],
        },
    };
    let outputs = child.designated_outputs();
    child.output_taps = parent_low
        .output_taps
        .iter()
        .map(|&t| {
            if outputs.binary_search(&t).is_ok() {
                t
            } else {
                outputs[rng.random_range(0..outputs.len())]
            }
        })
        .collect();
    sort_edges(&mut child);
    debug_assert_eq!(child.validate(), Ok(()));
    child
}

/// Per-event probabilities of the structural mutations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutationRates {
    pub add_motif: f64,
    pub remove_motif: f64,
    pub replace_motif: f64,
    pub reweight_edge: f64,
    pub retarget_output: f64,
}

impl Default for MutationRates {
    fn default() -> Self {
        MutationRates {
            add_motif: 0.35,
            remove_motif: 0.40,
            replace_motif: 0.75,
            reweight_edge: 0.60,
            retarget_output: 0.60,
        }
    }
}

/// Which of the mutually exclusive structural events is enabled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationMode {
    /// Growth phase: add-motif enabled, remove-motif disabled.
    Normal,
    /// Pruning phase: remove-motif enabled, add-motif disabled.
    Pruning,
}

impl std::fmt::Display for MutationMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MutationMode::Normal => "normal",
            MutationMode::Pruning => "pruning",
        })
    }
}

/// Apply the independent mutation events to a copy of `genome`, in fixed
/// order: add/remove (per `mode`), replace, reweight, retarget. The child's
/// lineage records `genome` as its sole parent; its `id` is left 0.
pub fn mutate<R: Rng>(
    genome: &MicrocircuitGenome,
    mode: MutationMode,
    rates: &MutationRates,
    set: &MotifSet,
    p_conn: f64,
    rng: &mut R,
) -> MicrocircuitGenome {
    let mut child = genome.clone();
    child.id = 0;
    child.lineage = Lineage {
        generation: genome.lineage.generation + 1,
        parents: vec![genome.id],
    };

    match mode {
        MutationMode::Normal => {
            if rng.random::<f64>() < rates.add_motif {
                let new_id = set.ids()[rng.random_range(0..set.len())];
                add_motif(&mut child, new_id, p_conn, rng);
            }
        }
        MutationMode::Pruning => {
            if rng.random::<f64>() < rates.remove_motif && child.motifs.len() > 1 {
                let victim = rng.random_range(0..child.motifs.len());
                remove_motif(&mut child, victim, rng);
            }
        }
    }

    if rng.random::<f64>() < rates.replace_motif {
        let slot = rng.random_range(0..child.motifs.len());
        let new_id = set.ids()[rng.random_range(0..set.len())];
        replace_motif(&mut child, slot, new_id, p_conn, rng);
    }

    if rng.random::<f64>() < rates.reweight_edge {
        let pool = child.input_edges.len() + child.inter_motif_edges.len();
        if pool > 0 {
            let index = rng.random_range(0..pool);
            let weight = sample_weight(rng);
            if index < child.input_edges.len() {
                child.input_edges[index].weight = weight;
            } else {
                child.inter_motif_edges[index - child.input_edges.len()].weight = weight;
            }
        }
    }

    if rng.random::<f64>() < rates.retarget_output && !child.output_taps.is_empty() {
        let tap_index = rng.random_range(0..child.output_taps.len());
        let outputs = child.designated_outputs();
        child.output_taps[tap_index] = outputs[rng.random_range(0..outputs.len())];
    }

    sort_edges(&mut child);
    debug_assert_eq!(child.validate(), Ok(()));
    child
}

/// Append a motif and wire it to the rest of the genome at `p_conn`:
/// first inter-motif pairs (existing -> new, then new -> existing, per
/// existing slot in order), then channel edges onto its designated inputs.
fn add_motif<R: Rng>(genome: &mut MicrocircuitGenome, new_id: MotifId, p_conn: f64, rng: &mut R) {
    let old_count = genome.motifs.len();
    let layout = Layout::of(&genome.motifs);
    let new_offset = layout.total;
    let new_template = template(new_id);
    genome.motifs.push(new_id);

    for slot in 0..old_count {
        let existing = template(genome.motifs[slot]);
        let offset = layout.offsets[slot];
        for &o in existing.outputs {
            for &i in new_template.inputs {
                if rng.random::<f64>() < p_conn {
                    genome.inter_motif_edges.push(Edge {
                        source: offset + o,
                        dest: new_offset + i,
                        weight: sample_weight(rng),
                    });
                }
            }
        }
        for &o in new_template.outputs {
            for &i in existing.inputs {
                if rng.random::<f64>() < p_conn {
                    genome.inter_motif_edges.push(Edge {
                        source: new_offset + o,
                        dest: offset + i,
                        weight: sample_weight(rng),
                    });
                }
            }
        }
    }
    for channel in 0..INPUT_CHANNELS {
        for &i in new_template.inputs {
            if rng.random::<f64>() < p_conn {
                genome.input_edges.push(InputEdge {
                    channel,
                    dest: new_offset + i,
                    weight: sample_weight(rng),
                });
            }
        }
    }
}

/// Remove the motif at `victim`, dropping every edge that touched it and
/// shifting all later indices down. Orphaned output taps are resampled
/// uniformly from the surviving designated outputs.
fn remove_motif<R: Rng>(genome: &mut MicrocircuitGenome, victim: usize, rng: &mut R) {
    debug_assert!(genome.motifs.len() > 1);
    let layout = Layout::of(&genome.motifs);
    let start = layout.offsets[victim];
    let size = template(genome.motifs[victim]).size;
    let end = start + size;
    let remap = |n: usize| -> Option<usize> {
        if n < start {
            Some(n)
        } else if n < end {
            None
        } else {
            Some(n - size)
        }
    };

    genome.motifs.remove(victim);
    genome.inter_motif_edges = genome
        .inter_motif_edges
        .iter()
        .filter_map(|e| {
            Some(Edge { source: remap(e.source)?, dest: remap(e.dest)?, weight: e.weight })
        })
        .collect();
    genome.input_edges = genome
        .input_edges
        .iter()
        .filter_map(|e| {
            Some(InputEdge { channel: e.channel, dest: remap(e.dest)?, weight: e.weight })
        })
        .collect();

    let remapped: Vec<Option<usize>> = genome.output_taps.iter().map(|&t| remap(t)).collect();
    let outputs = genome.designated_outputs();
    genome.output_taps = remapped
        .into_iter()
        .map(|t| t.unwrap_or_else(|| outputs[rng.random_range(0..outputs.len())]))
        .collect();
}

/// Swap the motif at `slot` for `new_id`. Edges and taps whose endpoint is
/// still a valid designated role at the same local index are preserved;
/// invalid ones are dropped (taps: resampled). Valid designated pairs that
/// are now absent are sampled at `p_conn`: per other slot in order, first
/// `slot -> other`, then `other -> slot`, then channel edges.
fn replace_motif<R: Rng>(
    genome: &mut MicrocircuitGenome,
    slot: usize,
    new_id: MotifId,
    p_conn: f64,
    rng: &mut R,
) {
    let old_layout = Layout::of(&genome.motifs);
    let start = old_layout.offsets[slot];
    let old_size = template(genome.motifs[slot]).size;
    let new_template = template(new_id);
    genome.motifs[slot] = new_id;

    // Map an old global index to the new numbering; None drops the edge.
    let shift = |n: usize| -> usize {
        if n < start + old_size {
            n
        } else {
            n - old_size + new_template.size
        }
    };
    let map_source = |n: usize| -> Option<usize> {
        if n >= start && n < start + old_size {
            let local = n - start;
            new_template.is_output(local).then_some(start + local)
        } else {
            Some(shift(n))
        }
    };
    let map_dest = |n: usize| -> Option<usize> {
        if n >= start && n < start + old_size {
            let local = n - start;
            new_template.is_input(local).then_some(start + local)
        } else {
            Some(shift(n))
        }
    };

    genome.inter_motif_edges = genome
        .inter_motif_edges
        .iter()
        .filter_map(|e| {
            Some(Edge { source: map_source(e.source)?, dest: map_dest(e.dest)?, weight: e.weight })
        })
        .collect();
    genome.input_edges = genome
        .input_edges
        .iter()
        .filter_map(|e| {
            Some(InputEdge { channel: e.channel, dest: map_dest(e.dest)?, weight: e.weight })
        })
        .collect();

    // Sample absent valid pairs involving the replaced slot.
    let layout = Layout::of(&genome.motifs);
    let present: std::collections::BTreeSet<(usize, usize)> = genome
        .inter_motif_edges
        .iter()
        .map(|e| (e.source, e.dest))
        .collect();
    let mut fresh = Vec::new();
    for other in 0..genome.motifs.len() {
        if other == slot {
            continue;
        }
        let other_template = template(genome.motifs[other]);
        let other_offset = layout.offsets[other];
        for &o in new_template.outputs {
            for &i in other_template.inputs {
                let pair = (start + o, other_offset + i);
                if !present.contains(&pair) && rng.random::<f64>() < p_conn {
                    fresh.push(Edge { source: pair.0, dest: pair.1, weight: sample_weight(rng) });
                }
            }
        }
        for &o in other_template.outputs {
            for &i in new_template.inputs {
                let pair = (other_offset + o, start + i);
                if !present.contains(&pair) && rng.random::<f64>() < p_conn {
                    fresh.push(Edge { source: pair.0, dest: pair.1, weight: sample_weight(rng) });
                }
            }
        }
    }
    genome.inter_motif_edges.extend(fresh);

    let present_inputs: std::collections::BTreeSet<(usize, usize)> =
        genome.input_edges.iter().map(|e| (e.channel, e.dest)).collect();
    for channel in 0..INPUT_CHANNELS {
        for &i in new_template.inputs {
            let pair = (channel, start + i);
            if !present_inputs.contains(&pair) && rng.random::<f64>() < p_conn {
                genome.input_edges.push(InputEdge {
                    channel,
                    dest: start + i,
                    weight: sample_weight(rng),
                });
            }
        }
    }

    // Taps: keep where the local index is still a designated output.
    let remapped: Vec<Option<usize>> = genome
        .output_taps
        .iter()
        .map(|&t| {
            if t >= start && t < start + old_size {
                let local = t - start;
                new_template.is_output(local).then_some(start + local)
            } else {
                Some(shift(t))
            }
        })
        .collect();
    let outputs = genome.designated_outputs();
    genome.output_taps = remapped
        .into_iter()
        .map(|t| t.unwrap_or_else(|| outputs[rng.random_range(0..outputs.len())]))
        .collect();
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motif::MotifProfile;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn initial_set() -> MotifSet {
        MotifSet::from_profile(MotifProfile::Initial)
    }

    fn single_ffe() -> MicrocircuitGenome {
        MicrocircuitGenome {
            id: 1,
            motifs: vec![MotifId::FFE],
            inter_motif_edges: vec![],
            input_edges: vec![],
            output_taps: vec![1],
            lineage: Lineage::default(),
        }
    }

    #[test]
    fn complexity_of_bare_ffe_is_four() {
        assert_eq!(single_ffe().complexity(), 4);
    }

    #[test]
    fn designated_indices_are_global_and_sorted() {
        let g = MicrocircuitGenome {
            id: 0,
            motifs: vec![MotifId::FFE, MotifId::FBI], // sizes 2 + 3
            inter_motif_edges: vec![],
            input_edges: vec![],
            output_taps: vec![1],
            lineage: Lineage::default(),
        };
        assert_eq!(g.neuron_count(), 5);
        assert_eq!(g.block_offsets(), vec![0, 2]);
        assert_eq!(g.designated_inputs(), vec![0, 2]); // FFE in 0, FBI in 0 -> global 2
        assert_eq!(g.designated_outputs(), vec![1, 4]); // FFE out 1, FBI out 2 -> global 4
        assert_eq!(g.motif_of(0), 0);
        assert_eq!(g.motif_of(1), 0);
        assert_eq!(g.motif_of(2), 1);
        assert_eq!(g.motif_of(4), 1);
    }

    #[test]
    fn validation_rejects_bad_wiring() {
        let mut g = single_ffe();
        g.motifs.push(MotifId::FFE); // neurons 0..4, inputs {0, 2}, outputs {1, 3}
        g.output_taps = vec![1];

        let cases: Vec<(MicrocircuitGenome, GenomeError)> = vec![
            (
                {
                    let mut g = g.clone();
                    g.inter_motif_edges =
                        vec![Edge { source: 0, dest: 2, weight: 0.5 }];
                    g
                },
                GenomeError::SourceNotOutput(0),
            ),
            (
                {
                    let mut g = g.clone();
                    g.inter_motif_edges =
                        vec![Edge { source: 1, dest: 3, weight: 0.5 }];
                    g
                },
                GenomeError::DestNotInput(3),
            ),
            (
                {
                    let mut g = g.clone();
                    g.inter_motif_edges =
                        vec![Edge { source: 3, dest: 2, weight: 0.5 }];
                    g
                },
                GenomeError::SameMotif(3, 2),
            ),
            (
                {
                    let mut g = g.clone();
                    g.inter_motif_edges =
                        vec![Edge { source: 1, dest: 2, weight: 1.5 }];
                    g
                },
                GenomeError::BadWeight(1.5),
            ),
            (
                {
                    let mut g = g.clone();
                    g.inter_motif_edges =
                        vec![Edge { source: 1, dest: 2, weight: 0.0 }];
                    g
                },
                GenomeError::BadWeight(0.0),
            ),
            (
                {
                    let mut g = g.clone();
                    g.input_edges = vec![InputEdge { channel: 8, dest: 0, weight: 0.5 }];
                    g
                },
                GenomeError::BadChannel(8),
            ),
            (
                {
                    let mut g = g.clone();
                    g.output_taps = vec![0];
                    g
                },
                GenomeError::BadTap(0),
            ),
            (
                {
                    let mut g = g.clone();
                    g.inter_motif_edges = vec![
                        Edge { source: 1, dest: 2, weight: 0.5 },
                        Edge { source: 1, dest: 2, weight: -0.5 },
                    ];
                    g
                },
                GenomeError::DuplicateEdge(1, 2),
            ),
        ];
        for (genome, expected) in cases {
            assert_eq!(genome.validate(), Err(expected));
        }

        let mut empty = single_ffe();
        empty.motifs.clear();
        empty.output_taps.clear();
        assert_eq!(empty.validate(), Err(GenomeError::EmptyMotifs));
    }

    #[test]
    fn tiling_preserves_template_signs_and_wiring() {
        let g = MicrocircuitGenome {
            id: 0,
            motifs: vec![MotifId::FFE, MotifId::FBI],
            inter_motif_edges: vec![Edge { source: 1, dest: 2, weight: -0.75 }],
            input_edges: vec![InputEdge { channel: 3, dest: 0, weight: 0.25 }],
            output_taps: vec![4],
            lineage: Lineage::default(),
        };
        let net = tile(&g).unwrap();
        assert_eq!(net.neuron_count, 5);
        // FFE block: 0 -> 1 excitatory.
        assert_eq!(net.weight(0, 1), 1.0);
        assert_eq!(net.weight(1, 0), 0.0);
        // FBI block at offset 2: 0->1, 1->2, 2->0 with signs +,+,-.
        assert_eq!(net.weight(2, 3), 1.0);
        assert_eq!(net.weight(3, 4), 1.0);
        assert_eq!(net.weight(4, 2), -1.0);
        // Genome wiring.
        assert_eq!(net.weight(1, 2), -0.75);
        assert_eq!(net.input_weight(3, 0), 0.25);
        assert_eq!(net.input_weight(0, 0), 0.0);
        assert_eq!(net.output_taps, vec![4]);
    }

    #[test]
    fn tiling_rejects_invalid_genome() {
        let mut g = single_ffe();
        g.output_taps = vec![0];
        assert_eq!(tile(&g), Err(GenomeError::BadTap(0)));
    }

    #[test]
    fn random_genome_extremes_of_p_conn() {
        let set = initial_set();
        let full = random_genome(&mut rng(5), 3, &set, 1.0, 1).unwrap();
        // Every ordered cross-motif designated pair must be wired.
        let expected_inter: usize = {
            let t: Vec<_> = full.motifs.iter().map(|&m| template(m)).collect();
            let mut n = 0;
            for a in 0..3 {
                for b in 0..3 {
                    if a != b {
                        n += t[a].outputs.len() * t[b].inputs.len();
                    }
                }
            }
            n
        };
        assert_eq!(full.inter_motif_edges.len(), expected_inter);
        let expected_input: usize =
            INPUT_CHANNELS * full.motifs.iter().map(|&m| template(m).inputs.len()).sum::<usize>();
        assert_eq!(full.input_edges.len(), expected_input);
        assert_eq!(full.validate(), Ok(()));

        let empty = random_genome(&mut rng(5), 3, &set, 0.0, 1).unwrap();
        assert!(empty.inter_motif_edges.is_empty());
        assert!(empty.input_edges.is_empty());
        assert_eq!(empty.output_taps.len(), 1);
        assert_eq!(empty.validate(), Ok(()));
    }

    #[test]
    fn random_genome_is_deterministic_per_seed() {
        let set = initial_set();
        let a = random_genome(&mut rng(99), 4, &set, 0.25, 1).unwrap();
        let b = random_genome(&mut rng(99), 4, &set, 0.25, 1).unwrap();
        assert_eq!(a, b);
        let c = random_genome(&mut rng(100), 4, &set, 0.25, 1).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn random_genome_weights_in_range_and_nonzero() {
        let set = initial_set();
        for seed in 0..20 {
            let g = random_genome(&mut rng(seed), 4, &set, 0.8, 2).unwrap();
            for w in g
                .inter_motif_edges
                .iter()
                .map(|e| e.weight)
                .chain(g.input_edges.iter().map(|e| e.weight))
            {
                assert!(w != 0.0 && (-1.0..=1.0).contains(&w));
            }
        }
    }

    #[test]
    fn random_genome_rejects_bad_arguments() {
        let set = initial_set();
        assert_eq!(
            random_genome(&mut rng(0), 0, &set, 0.5, 1),
            Err(GenomeError::EmptyMotifs)
        );
        assert_eq!(
            random_genome(&mut rng(0), 2, &set, 1.5, 1),
            Err(GenomeError::BadProbability(1.5))
        );
        assert_eq!(random_genome(&mut rng(0), 2, &set, 0.5, 0), Err(GenomeError::NoTaps));
    }

    #[test]
    fn crossover_child_count_is_rounded_mean() {
        let set = initial_set();
        let p3 = random_genome(&mut rng(1), 3, &set, 0.25, 1).unwrap();
        let p4 = random_genome(&mut rng(2), 4, &set, 0.25, 1).unwrap();
        for seed in 0..10 {
            let child = crossover(&p3, &p4, 0.6, 0.25, &mut rng(seed));
            assert_eq!(child.motifs.len(), 4); // round(3.5) away from zero
            assert_eq!(child.validate(), Ok(()));
        }
        let p1 = random_genome(&mut rng(3), 1, &set, 0.25, 1).unwrap();
        let child = crossover(&p1, &p1, 0.6, 0.25, &mut rng(7));
        assert_eq!(child.motifs.len(), 1);
    }

    #[test]
    fn crossover_ratio_one_sources_only_from_low() {
        // parent_low all-FFE, parent_high all-CPG: with ratio 1.0 every slot
        // must carry an FFE.
        let set = initial_set();
        let mut low = random_genome(&mut rng(10), 3, &set, 0.3, 1).unwrap();
        low.motifs = vec![MotifId::FFE; 3];
        low.inter_motif_edges.clear();
        low.input_edges.clear();
        low.output_taps = vec![1];
        let mut high = random_genome(&mut rng(11), 3, &set, 0.3, 1).unwrap();
        high.motifs = vec![MotifId::CPG; 3];
        high.inter_motif_edges.clear();
        high.input_edges.clear();
        high.output_taps = vec![0];
        for seed in 0..10 {
            let child = crossover(&low, &high, 1.0, 0.25, &mut rng(seed));
            assert!(child.motifs.iter().all(|&m| m == MotifId::FFE));
        }
    }

    #[test]
    fn crossover_is_deterministic_and_pure() {
        let set = initial_set();
        let a = random_genome(&mut rng(21), 3, &set, 0.25, 1).unwrap();
        let b = random_genome(&mut rng(22), 5, &set, 0.25, 1).unwrap();
        let (a_copy, b_copy) = (a.clone(), b.clone());
        let c1 = crossover(&a, &b, 0.6, 0.25, &mut rng(77));
        let c2 = crossover(&a, &b, 0.6, 0.25, &mut rng(77));
        assert_eq!(c1, c2);
        assert_eq!(a, a_copy);
        assert_eq!(b, b_copy);
        assert_eq!(c1.lineage.parents, vec![a.id, b.id]);
    }

    #[test]
    fn mutate_with_zero_rates_changes_nothing_structural() {
        let set = initial_set();
        let g = random_genome(&mut rng(31), 3, &set, 0.25, 1).unwrap();
        let rates = MutationRates {
            add_motif: 0.0,
            remove_motif: 0.0,
            replace_motif: 0.0,
            reweight_edge: 0.0,
            retarget_output: 0.0,
        };
        let child = mutate(&g, MutationMode::Normal, &rates, &set, 0.25, &mut rng(1));
        assert_eq!(child.motifs, g.motifs);
        assert_eq!(child.inter_motif_edges, g.inter_motif_edges);
        assert_eq!(child.input_edges, g.input_edges);
        assert_eq!(child.output_taps, g.output_taps);
        assert_eq!(child.lineage.parents, vec![g.id]);
        assert_eq!(child.lineage.generation, g.lineage.generation + 1);
    }

    #[test]
    fn add_only_mutation_grows_complexity() {
        let set = initial_set();
        let g = random_genome(&mut rng(32), 2, &set, 0.25, 1).unwrap();
        let rates = MutationRates {
            add_motif: 1.0,
            remove_motif: 0.0,
            replace_motif: 0.0,
            reweight_edge: 0.0,
            retarget_output: 0.0,
        };
        for seed in 0..20 {
            let child = mutate(&g, MutationMode::Normal, &rates, &set, 0.25, &mut rng(seed));
            assert_eq!(child.motifs.len(), g.motifs.len() + 1);
            assert!(child.complexity() > g.complexity());
            assert_eq!(child.validate(), Ok(()));
        }
    }

    #[test]
    fn remove_only_mutation_shrinks_complexity_with_floor_of_one() {
        let set = initial_set();
        let rates = MutationRates {
            add_motif: 0.0,
            remove_motif: 1.0,
            replace_motif: 0.0,
            reweight_edge: 0.0,
            retarget_output: 0.0,
        };
        let g = random_genome(&mut rng(33), 3, &set, 0.4, 1).unwrap();
        for seed in 0..20 {
            let child = mutate(&g, MutationMode::Pruning, &rates, &set, 0.25, &mut rng(seed));
            assert_eq!(child.motifs.len(), 2);
            assert!(child.complexity() < g.complexity());
            assert_eq!(child.validate(), Ok(()));
        }

        let single = random_genome(&mut rng(34), 1, &set, 0.4, 1).unwrap();
        let child = mutate(&single, MutationMode::Pruning, &rates, &set, 0.25, &mut rng(0));
        assert_eq!(child.motifs.len(), 1);
        assert_eq!(child.motifs, single.motifs);
    }

    #[test]
    fn add_is_inert_in_pruning_mode_and_remove_in_normal_mode() {
        let set = initial_set();
        let g = random_genome(&mut rng(35), 3, &set, 0.25, 1).unwrap();
        let only_add = MutationRates {
            add_motif: 1.0,
            remove_motif: 0.0,
            replace_motif: 0.0,
            reweight_edge: 0.0,
            retarget_output: 0.0,
        };
        let child = mutate(&g, MutationMode::Pruning, &only_add, &set, 0.25, &mut rng(0));
        assert_eq!(child.motifs.len(), 3);

        let only_remove = MutationRates { add_motif: 0.0, remove_motif: 1.0, ..only_add };
        let child = mutate(&g, MutationMode::Normal, &only_remove, &set, 0.25, &mut rng(0));
        assert_eq!(child.motifs.len(), 3);
    }

    #[test]
    fn replace_mutation_keeps_count_and_validity() {
        let set = initial_set();
        let rates = MutationRates {
            add_motif: 0.0,
            remove_motif: 0.0,
            replace_motif: 1.0,
            reweight_edge: 0.0,
            retarget_output: 0.0,
        };
        for seed in 0..30 {
            let g = random_genome(&mut rng(seed), 3, &set, 0.4, 2).unwrap();
            let child = mutate(&g, MutationMode::Normal, &rates, &set, 0.25, &mut rng(seed + 500));
            assert_eq!(child.motifs.len(), 3);
            assert_eq!(child.validate(), Ok(()));
            assert_eq!(child.output_taps.len(), g.output_taps.len());
        }
    }

    #[test]
    fn reweight_skips_genomes_without_edges() {
        let set = initial_set();
        let g = random_genome(&mut rng(36), 2, &set, 0.0, 1).unwrap();
        assert!(g.inter_motif_edges.is_empty() && g.input_edges.is_empty());
        let rates = MutationRates {
            add_motif: 0.0,
            remove_motif: 0.0,
            replace_motif: 0.0,
            reweight_edge: 1.0,
            retarget_output: 0.0,
        };
        let child = mutate(&g, MutationMode::Normal, &rates, &set, 0.0, &mut rng(0));
        assert_eq!(child.motifs, g.motifs);
        assert!(child.inter_motif_edges.is_empty());
    }

    #[test]
    fn reweight_changes_exactly_one_weight() {
        let set = initial_set();
        let g = random_genome(&mut rng(37), 3, &set, 0.5, 1).unwrap();
        let rates = MutationRates {
            add_motif: 0.0,
            remove_motif: 0.0,
            replace_motif: 0.0,
            reweight_edge: 1.0,
            retarget_output: 0.0,
        };
        let child = mutate(&g, MutationMode::Normal, &rates, &set, 0.25, &mut rng(3));
        let before: Vec<f64> = g
            .input_edges
            .iter()
            .map(|e| e.weight)
            .chain(g.inter_motif_edges.iter().map(|e| e.weight))
            .collect();
        let after: Vec<f64> = child
            .input_edges
            .iter()
            .map(|e| e.weight)
            .chain(child.inter_motif_edges.iter().map(|e| e.weight))
            .collect();
        assert_eq!(before.len(), after.len());
        let changed = before.iter().zip(&after).filter(|(a, b)| a != b).count();
        assert_eq!(changed, 1);
    }

    #[test]
    fn retarget_moves_tap_to_designated_output() {
        let set = initial_set();
        let rates = MutationRates {
            add_motif: 0.0,
            remove_motif: 0.0,
            replace_motif: 0.0,
            reweight_edge: 0.0,
            retarget_output: 1.0,
        };
        for seed in 0..20 {
            let g = random_genome(&mut rng(seed + 70), 3, &set, 0.25, 1).unwrap();
            let child = mutate(&g, MutationMode::Normal, &rates, &set, 0.25, &mut rng(seed));
            assert_eq!(child.validate(), Ok(()));
            let outputs = child.designated_outputs();
            assert!(outputs.binary_search(&child.output_taps[0]).is_ok());
        }
    }

    #[test]
    fn mean_complexity_requires_nonempty_population() {
        assert_eq!(mean_complexity(&[]), Err(GenomeError::EmptyPopulation));
        let g = single_ffe();
        assert_eq!(mean_complexity(&[g.clone(), g]).unwrap(), 4.0);
    }
}
