//! Artificial neural microcircuits: generation, simulation, and cataloguing
//! of small spiking networks assembled from a library of connection motifs.
//!
//! The crate is organised around a pipeline:
//!
//! * [`motif`] — the fixed library of motif templates (connection matrices
//!   with designated input/output neurons).
//! * [`genome`] — microcircuit genomes: motif instances wired together by
//!   weighted inter-motif and input-channel edges, plus the variation
//!   operators (random generation, crossover, mutation) that evolve them.
//! * [`sim`] — a discrete-time leaky integrate-and-fire simulator that turns
//!   a tiled genome plus input spike trains into output spike trains.
//! * [`stimulus`] — byte-pattern stimuli encoded as spike bursts across
//!   eight input channels, their ideal responses, and analysis reports.
//! * [`metrics`] — the bivariate SPIKE-distance between spike trains and
//!   pairwise distance matrices over behaviours.
//! * [`search`] — the three search procedures: novelty search with an
//!   adaptive archive threshold and complexity pruning, stimulus
//!   optimisation, and targeted evolution toward a reference response.
//! * [`catalogue`] — on-disk formats: catalogue files, stimulus files,
//!   run manifests, and CSV report writers.
//!
//! All stochastic operations draw from explicit, coordinate-addressed
//! random streams ([`rng::stream`]), so every run is reproducible from its
//! seed regardless of thread count.

pub mod catalogue;
pub mod genome;
pub mod metrics;
pub mod motif;
pub mod rng;
pub mod search;
pub mod sim;
pub mod stimulus;

pub use genome::{MicrocircuitGenome, MutationMode, MutationRates, TiledNetwork};
pub use metrics::{spike_distance, DistanceMatrix};
pub use motif::{MotifId, MotifProfile, MotifSet};
pub use sim::{simulate, NeuronParams, SpikeTrain, INPUT_CHANNELS};
pub use stimulus::{encode_text, EncodingParams, StimulusProgram};
