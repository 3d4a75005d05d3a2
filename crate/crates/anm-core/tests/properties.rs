//! Randomised invariants over genome construction, variation operators,
//! tiling, stimulus encoding, and the distance metric.

use anm_core::genome::{crossover, mutate, random_genome, tile, MutationMode, MutationRates};
use anm_core::metrics::spike_distance;
use anm_core::motif::{template, MotifProfile, MotifSet};
use anm_core::stimulus::{encode_patterns, EncodingParams};
use anm_core::{MicrocircuitGenome, SpikeTrain, INPUT_CHANNELS};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn any_profile() -> impl Strategy<Value = MotifProfile> {
    prop_oneof![
        Just(MotifProfile::Initial),
        Just(MotifProfile::Expanded),
        Just(MotifProfile::ExpandedNoCpg),
    ]
}

fn build(seed: u64, motifs: usize, profile: MotifProfile, p_conn: f64) -> MicrocircuitGenome {
    let set = MotifSet::from_profile(profile);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    random_genome(&mut rng, motifs, &set, p_conn, 1).expect("valid arguments")
}

/// Every structural fact the tiled matrices must reflect: template synapses
/// on the block diagonal with their catalogued signs, genome edges only
/// between designated outputs and inputs of distinct blocks, and channel
/// weights only on designated inputs.
fn assert_tiling_faithful(genome: &MicrocircuitGenome) {
    let net = tile(genome).expect("genome validates");
    let n = net.neuron_count;
    let offsets = genome.block_offsets();
    let inputs = genome.designated_inputs();
    let outputs = genome.designated_outputs();

    for from in 0..n {
        for to in 0..n {
            let w = net.weight(from, to);
            let (bf, bt) = (genome.motif_of(from), genome.motif_of(to));
            if bf == bt {
                let t = template(genome.motifs[bf]);
                let sign = t.entry(from - offsets[bf], to - offsets[bt]);
                assert_eq!(
                    w, sign as f64,
                    "in-block cell ({from},{to}) must carry the template sign"
                );
            } else if w != 0.0 {
                assert!(
                    outputs.contains(&from) && inputs.contains(&to),
                    "edge ({from},{to}) joins non-designated neurons"
                );
            }
        }
    }
    for channel in 0..INPUT_CHANNELS {
        for to in 0..n {
            if net.input_weight(channel, to) != 0.0 {
                assert!(inputs.contains(&to), "channel {channel} feeds non-input {to}");
            }
        }
    }
}

proptest! {
    #[test]
    fn random_genomes_validate_and_are_seed_deterministic(
        seed in any::<u64>(),
        motifs in 1usize..=5,
        profile in any_profile(),
        p_conn in 0.0f64..=1.0,
    ) {
        let g1 = build(seed, motifs, profile, p_conn);
        let g2 = build(seed, motifs, profile, p_conn);
        prop_assert_eq!(&g1, &g2);
        prop_assert_eq!(g1.validate(), Ok(()));
        prop_assert_eq!(g1.motifs.len(), motifs);
    }

    #[test]
    fn tiling_respects_designated_roles(
        seed in any::<u64>(),
        motifs in 1usize..=4,
        profile in any_profile(),
        p_conn in 0.0f64..=1.0,
    ) {
        let genome = build(seed, motifs, profile, p_conn);
        assert_tiling_faithful(&genome);
    }

    #[test]
    fn mutation_chain_preserves_validity_and_template_signs(
        seed in any::<u64>(),
        motifs in 1usize..=4,
        profile in any_profile(),
    ) {
        let set = MotifSet::from_profile(profile);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut genome = random_genome(&mut rng, motifs, &set, 0.25, 1).unwrap();
        for round in 0..5 {
            let mode = if round % 2 == 0 { MutationMode::Normal } else { MutationMode::Pruning };
            genome = mutate(&genome, mode, &MutationRates::default(), &set, 0.25, &mut rng);
            prop_assert_eq!(genome.validate(), Ok(()));
        }
        assert_tiling_faithful(&genome);
    }

    #[test]
    fn variation_operators_are_seed_deterministic(
        seed in any::<u64>(),
        profile in any_profile(),
    ) {
        let set = MotifSet::from_profile(profile);
        let a = build(seed ^ 1, 2, profile, 0.25);
        let b = build(seed ^ 2, 3, profile, 0.25);
        let kids: Vec<MicrocircuitGenome> = (0..2)
            .map(|_| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let child = crossover(&a, &b, 0.6, 0.25, &mut rng);
                mutate(&child, MutationMode::Normal, &MutationRates::default(), &set, 0.25, &mut rng)
            })
            .collect();
        prop_assert_eq!(&kids[0], &kids[1]);
        prop_assert_eq!(kids[0].validate(), Ok(()));
    }

    #[test]
    fn growth_accretes_and_pruning_shrinks(
        seed in any::<u64>(),
        motifs in 1usize..=4,
        profile in any_profile(),
    ) {
        let set = MotifSet::from_profile(profile);
        let genome = build(seed, motifs, profile, 0.25);
        let before = genome.complexity();
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(99));

        let grow_only = MutationRates {
            add_motif: 1.0,
            remove_motif: 1.0,
            replace_motif: 0.0,
            reweight_edge: 0.0,
            retarget_output: 0.0,
        };
        let grown = mutate(&genome, MutationMode::Normal, &grow_only, &set, 0.25, &mut rng);
        prop_assert_eq!(grown.motifs.len(), motifs + 1);
        prop_assert!(grown.complexity() > before);

        let pruned = mutate(&genome, MutationMode::Pruning, &grow_only, &set, 0.25, &mut rng);
        prop_assert_eq!(pruned.motifs.len(), motifs.saturating_sub(1).max(1));
        if motifs > 1 {
            prop_assert!(pruned.complexity() < before);
        } else {
            prop_assert_eq!(pruned.complexity(), before);
        }
    }

    #[test]
    fn crossover_child_size_is_rounded_mean(
        seed in any::<u64>(),
        na in 1usize..=5,
        nb in 1usize..=5,
    ) {
        let a = build(seed ^ 7, na, MotifProfile::Expanded, 0.25);
        let b = build(seed ^ 8, nb, MotifProfile::Expanded, 0.25);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let child = crossover(&a, &b, 0.6, 0.25, &mut rng);
        let expected = (((na + nb) as f64) / 2.0).round().max(1.0) as usize;
        prop_assert_eq!(child.motifs.len(), expected);
        prop_assert_eq!(child.validate(), Ok(()));
        prop_assert_eq!(child.lineage.parents.len(), 2);
    }

    #[test]
    fn encoding_round_trips_through_an_independent_decoder(
        patterns in prop::collection::vec(1u8..=255, 1..40),
        lsb in any::<bool>(),
    ) {
        let params = EncodingParams { lsb_channel_zero: lsb, ..EncodingParams::default() };
        let program = encode_patterns(&patterns, &params).unwrap();
        prop_assert_eq!(program.duration_ms, patterns.len() as f64 * params.window_ms);

        // Decode each window by probing every channel for a spike at the
        // window start; bit order re-derived from the declared convention.
        for (window, &expected) in patterns.iter().enumerate() {
            let base = window as f64 * params.window_ms;
            let mut byte = 0u8;
            for bit in 0..8 {
                let channel = if lsb { bit } else { INPUT_CHANNELS - 1 - bit };
                let hit = program.trains[channel]
                    .times()
                    .binary_search_by(|t| t.partial_cmp(&base).unwrap())
                    .is_ok();
                if hit {
                    byte |= 1 << bit;
                }
            }
            prop_assert_eq!(byte, expected, "window {} decoded wrong", window);
        }
    }

    #[test]
    fn distance_axioms_hold_for_arbitrary_trains(
        mut ta in prop::collection::vec(0.0f64..200.0, 0..25),
        mut tb in prop::collection::vec(0.0f64..200.0, 0..25),
    ) {
        ta.sort_by(|x, y| x.partial_cmp(y).unwrap());
        ta.dedup();
        tb.sort_by(|x, y| x.partial_cmp(y).unwrap());
        tb.dedup();
        let a = SpikeTrain::new(200.0, ta).unwrap();
        let b = SpikeTrain::new(200.0, tb).unwrap();
        let d_ab = spike_distance(&a, &b, 0.5).unwrap();
        let d_ba = spike_distance(&b, &a, 0.5).unwrap();
        prop_assert_eq!(d_ab.to_bits(), d_ba.to_bits());
        prop_assert!((0.0..=1.0 + 1e-9).contains(&d_ab));
        prop_assert_eq!(spike_distance(&a, &a, 0.5).unwrap(), 0.0);
    }
}
