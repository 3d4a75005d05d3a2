//! Cross-checks the spike-distance implementation against an independent
//! naive evaluator: corner measures found by linear scan, the dissimilarity
//! profile averaged point-by-point on a 10x finer grid. The naive path shares
//! no code with the library's swept, closed-form integration, so agreement
//! within tolerance vouches for both.

use anm_core::metrics::{corner_measures, instantaneous_spike_diff, spike_distance};
use anm_core::SpikeTrain;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// The train's times augmented with boundary spikes at 0 and duration.
fn augmented(train: &SpikeTrain) -> Vec<f64> {
    let mut aug = vec![0.0];
    for &s in train.times() {
        if s > 0.0 {
            aug.push(s);
        }
    }
    aug.push(train.duration_ms());
    aug
}

/// Previous/following spike and enclosing interval at `t`, by linear scan
/// over an augmented time list. Returns (previous, following, interval).
fn naive_corners(aug: &[f64], t: f64) -> (f64, f64, f64) {
    for (i, &s) in aug.iter().enumerate() {
        if s == t {
            // On a spike the corner times collapse; the interval is the one
            // that follows, except at the end of the window where only the
            // preceding interval exists.
            let interval = if i + 1 < aug.len() { aug[i + 1] - t } else { t - aug[i - 1] };
            return (t, t, interval);
        }
        if s > t {
            return (aug[i - 1], s, s - aug[i - 1]);
        }
    }
    unreachable!("t must fall within the augmented train");
}

/// The instantaneous dissimilarity S(t), evaluated directly from the five
/// bivariate quantities.
fn naive_s(aug_a: &[f64], aug_b: &[f64], t: f64) -> f64 {
    let (pa, fa, ia) = naive_corners(aug_a, t);
    let (pb, fb, ib) = naive_corners(aug_b, t);
    let dtp = (pa - pb).abs();
    let dtf = (fa - fb).abs();
    let xp = ((t - pa) + (t - pb)) / 2.0;
    let xf = ((fa - t) + (fb - t)) / 2.0;
    let xisi = (ia + ib) / 2.0;
    (dtp * xf + dtf * xp) / (xisi * xisi)
}

/// Mean of S over a uniform left-closed grid with the requested step,
/// shrunk when the step would skip over an inter-spike interval.
fn naive_distance(a: &SpikeTrain, b: &SpikeTrain, step: f64) -> f64 {
    let duration = a.duration_ms();
    let aug_a = augmented(a);
    let aug_b = augmented(b);
    let mut gap = f64::INFINITY;
    for aug in [&aug_a, &aug_b] {
        for w in aug.windows(2) {
            gap = gap.min(w[1] - w[0]);
        }
    }
    let eff = if step < gap { step } else { gap / 2.0 };
    let k_count = ((duration / eff).ceil() as u64).max(1);
    let delta = duration / k_count as f64;
    let mut sum = 0.0;
    for k in 0..k_count {
        sum += naive_s(&aug_a, &aug_b, k as f64 * delta);
    }
    sum / k_count as f64
}

fn train(duration: f64, times: &[f64]) -> SpikeTrain {
    SpikeTrain::new(duration, times.to_vec()).unwrap()
}

/// `n` distinct times drawn from the lattice {pitch, 2*pitch, ...} strictly
/// inside the window, sorted ascending.
fn lattice_train(rng: &mut ChaCha8Rng, duration: f64, pitch: f64, n: usize) -> SpikeTrain {
    let slots = (duration / pitch).ceil() as usize - 1;
    let mut pool: Vec<f64> = (1..=slots).map(|k| k as f64 * pitch).collect();
    for i in 0..n {
        let j = rng.random_range(i..pool.len());
        pool.swap(i, j);
    }
    let mut times = pool[..n].to_vec();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    SpikeTrain::new(duration, times).unwrap()
}

/// Arbitrary times anywhere in the window (deduplicated), exercising the
/// grid-shrinking path.
fn rough_train(rng: &mut ChaCha8Rng, duration: f64, max_spikes: usize) -> SpikeTrain {
    let n = rng.random_range(0..=max_spikes);
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..duration)).collect();
    times.sort_by(|x, y| x.partial_cmp(y).unwrap());
    times.dedup();
    SpikeTrain::new(duration, times).unwrap()
}

#[test]
fn hand_evaluated_profile_points() {
    let a = train(100.0, &[40.0]);
    let b = train(100.0, &[60.0]);
    // t = 50: both corners 40/100 vs 0/60, all five quantities land on
    // round numbers and S = (40*30 + 40*30) / 60^2 = 2/3.
    assert_eq!(instantaneous_spike_diff(&a, &b, 50.0).unwrap(), 2.0 / 3.0);
    // t = 25: previous spikes agree (the auxiliary 0), so only the
    // following-spike term contributes: (20 * 25) / 50^2 = 1/5.
    assert_eq!(instantaneous_spike_diff(&a, &b, 25.0).unwrap(), 0.2);
    // Identical trains are indistinguishable everywhere.
    assert_eq!(instantaneous_spike_diff(&a, &a, 33.3).unwrap(), 0.0);
}

#[test]
fn corner_conventions_match_naive_scan() {
    let empty = SpikeTrain::empty(100.0).unwrap();
    let c = corner_measures(&empty, 50.0).unwrap();
    assert_eq!((c.previous, c.following, c.interval), (0.0, 100.0, 100.0));

    let t = train(300.0, &[100.0, 200.0]);
    // On an interior spike: the following interval.
    let c = corner_measures(&t, 100.0).unwrap();
    assert_eq!((c.previous, c.following, c.interval), (100.0, 100.0, 100.0));
    // At the very end of the window: the preceding interval.
    let c = corner_measures(&t, 300.0).unwrap();
    assert_eq!((c.previous, c.following, c.interval), (300.0, 300.0, 100.0));
    // A spike exactly at zero must not duplicate the boundary spike.
    let z = train(100.0, &[0.0, 30.0]);
    let c = corner_measures(&z, 0.0).unwrap();
    assert_eq!((c.previous, c.following, c.interval), (0.0, 0.0, 30.0));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..200 {
        let tr = rough_train(&mut rng, 200.0, 20);
        let at = rng.random_range(0.0..=200.0);
        let c = corner_measures(&tr, at).unwrap();
        assert_eq!((c.previous, c.following, c.interval), naive_corners(&augmented(&tr), at));
    }
}

#[test]
fn distance_matches_tenfold_finer_naive_grid() {
    // The two grids sample the same piecewise-linear profile, so their means
    // differ by a rectangle-rule term that grows with spike density. The
    // tolerance below is an absolute bound, hence the pairs are drawn at
    // densities where the half-millisecond grid resolves every segment well.
    let sample_dt = 0.5;
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (na, nb) = (rng.random_range(3..=24), rng.random_range(3..=24));
        let a = lattice_train(&mut rng, 6000.0, 16.0, na);
        let b = lattice_train(&mut rng, 6000.0, 16.0, nb);
        let fast = spike_distance(&a, &b, sample_dt).unwrap();
        let dense = naive_distance(&a, &b, sample_dt / 10.0);
        worst = worst.max((fast - dense).abs());
    }
    assert!(worst < 1e-3, "worst deviation from dense-grid oracle: {worst}");
}

#[test]
fn distance_equals_naive_sum_on_identical_grid() {
    // With the same step the naive point-by-point mean and the closed-form
    // sweep evaluate the same finite sum; only accumulation order differs.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..50 {
        let a = rough_train(&mut rng, 150.0, 25);
        let b = rough_train(&mut rng, 150.0, 25);
        let fast = spike_distance(&a, &b, 0.5).unwrap();
        let naive = naive_distance(&a, &b, 0.5);
        assert!(
            (fast - naive).abs() < 1e-9,
            "same-grid disagreement: {fast} vs {naive}"
        );
    }
}

#[test]
fn metric_axioms_on_mixed_textures() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for round in 0..1000 {
        let duration = rng.random_range(50.0..400.0);
        let a = rough_train(&mut rng, duration, 30);
        let b = rough_train(&mut rng, duration, 30);
        let d_ab = spike_distance(&a, &b, 0.5).unwrap();
        let d_ba = spike_distance(&b, &a, 0.5).unwrap();
        assert_eq!(d_ab.to_bits(), d_ba.to_bits(), "symmetry broke on round {round}");
        assert!((0.0..=1.0 + 1e-9).contains(&d_ab), "range broke: {d_ab}");
        assert_eq!(spike_distance(&a, &a, 0.5).unwrap(), 0.0);
    }
    // Degenerate shapes.
    let empty = SpikeTrain::empty(80.0).unwrap();
    let single = train(80.0, &[40.0]);
    assert_eq!(spike_distance(&empty, &empty, 0.5).unwrap(), 0.0);
    let d = spike_distance(&empty, &single, 0.5).unwrap();
    assert!(d > 0.0 && d <= 1.0 + 1e-9);
}

#[test]
fn refining_the_grid_converges() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..20 {
        let (na, nb) = (rng.random_range(5..=30), rng.random_range(5..=30));
        let a = lattice_train(&mut rng, 500.0, 4.0, na);
        let b = lattice_train(&mut rng, 500.0, 4.0, nb);
        let steps = [0.5, 0.25, 0.125, 0.0625];
        let d: Vec<f64> =
            steps.iter().map(|&s| spike_distance(&a, &b, s).unwrap()).collect();
        let first_gap = (d[0] - d[1]).abs();
        let last_gap = (d[2] - d[3]).abs();
        assert!(
            last_gap <= first_gap + 1e-12,
            "refinement diverged: {first_gap} then {last_gap}"
        );
        assert!(last_gap < 1e-3);
    }
}

#[test]
fn sub_sample_intervals_shrink_the_grid() {
    // Bursts at 0.2 ms pitch sit below the default 0.5 ms sampling interval;
    // the distance must still be finite, symmetric, and stable under further
    // refinement.
    let times_a: Vec<f64> = (0..50).map(|k| 40.0 + 0.2 * k as f64).collect();
    let times_b: Vec<f64> = (0..50).map(|k| 55.0 + 0.2 * k as f64).collect();
    let a = SpikeTrain::new(120.0, times_a).unwrap();
    let b = SpikeTrain::new(120.0, times_b).unwrap();
    let d = spike_distance(&a, &b, 0.5).unwrap();
    let d_fine = spike_distance(&a, &b, 0.05).unwrap();
    assert!((0.0..=1.0 + 1e-9).contains(&d));
    assert!((d - d_fine).abs() < 5e-3, "shrunk grid drifted: {d} vs {d_fine}");
    assert_eq!(
        spike_distance(&a, &b, 0.5).unwrap().to_bits(),
        spike_distance(&b, &a, 0.5).unwrap().to_bits()
    );
}
