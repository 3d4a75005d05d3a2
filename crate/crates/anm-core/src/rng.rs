//! Seeded random-stream derivation.
//!
//! Every random decision in a run is drawn from a stream identified by
//! `(seed, domain, generation, slot)`. Workers derive their own stream from
//! those coordinates instead of sharing a generator, so results are
//! independent of evaluation order and thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The independent random-decision domains of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Initial novelty-search population.
    InitialPopulation,
    /// Novelty-search offspring (selection, crossover, mutation).
    Offspring,
    /// Initial targeted-evolution population.
    TargetedInit,
    /// Targeted-evolution offspring.
    TargetedChild,
    /// Initial stimulus-optimiser population.
    StimulusInit,
    /// Stimulus-optimiser offspring.
    StimulusChild,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::InitialPopulation => 1,
            StreamDomain::Offspring => 2,
            StreamDomain::TargetedInit => 3,
            StreamDomain::TargetedChild => 4,
            StreamDomain::StimulusInit => 5,
            StreamDomain::StimulusChild => 6,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive the generator for one `(domain, generation, slot)` cell of a
/// seeded run.
pub fn stream(seed: u64, domain: StreamDomain, generation: u64, slot: u64) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for v in [domain.tag(), generation, slot] {
        h = splitmix64(h ^ v);
    }
    ChaCha8Rng::seed_from_u64(h)
}
