//! Bivariate spike-train difference: an instantaneous dissimilarity profile
//! and its time-averaged distance, plus labelled pairwise distance matrices.
//!
//! Both trains are augmented with auxiliary spikes at 0 and at the end of
//! the observation window, so edge effects are bounded and the distance of
//! two empty trains is 0. The instantaneous profile is piecewise linear
//! between consecutive spike events, which the windowed mean exploits: grid
//! samples falling strictly inside one segment form an arithmetic series and
//! are summed in closed form, so cost scales with spike count, not grid size.

use std::io::{self, Write};

use rayon::prelude::*;
use thiserror::Error;

use crate::sim::SpikeTrain;

/// Errors from distance computations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("spike trains have different durations ({0} ms vs {1} ms)")]
    DurationMismatch(f64, f64),
    #[error("distance needs a positive observation window, got {0} ms")]
    ZeroDuration(f64),
    #[error("sample interval must be positive and finite, got {0}")]
    BadSampleInterval(f64),
    #[error("sample time {t} outside [0, {duration}]")]
    TimeOutOfRange { t: f64, duration: f64 },
    #[error("distance matrix needs at least one spike train")]
    EmptyInput,
    #[error("got {0} labels for {1} spike trains")]
    LabelMismatch(usize, usize),
}

/// The three corner measures of one train at one sample time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CornerMeasures {
    /// Time of the latest spike at or before `t` (auxiliary spikes count).
    pub previous: f64,
    /// Time of the earliest spike at or after `t`.
    pub following: f64,
    /// Length of the inter-spike interval `t` falls in. When `t` lies
    /// exactly on a spike this is the interval that follows it (or the one
    /// that precedes it, at the very end of the window).
    pub interval: f64,
}

/// Spike times augmented with auxiliary spikes at 0 and `duration`.
fn augment(train: &SpikeTrain) -> Vec<f64> {
    let times = train.times();
    let mut aug = Vec::with_capacity(times.len() + 2);
    aug.push(0.0);
    for &t in times {
        if t > 0.0 {
            aug.push(t);
        }
    }
    aug.push(train.duration_ms());
    aug
}

fn min_gap(aug: &[f64]) -> f64 {
    aug.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
}

fn check_window(duration: f64) -> Result<(), MetricError> {
    if duration > 0.0 {
        Ok(())
    } else {
        Err(MetricError::ZeroDuration(duration))
    }
}

/// Corner measures of `train` at time `t` within `[0, duration]`.
pub fn corner_measures(train: &SpikeTrain, t: f64) -> Result<CornerMeasures, MetricError> {
    check_window(train.duration_ms())?;
    if !t.is_finite() || t < 0.0 || t > train.duration_ms() {
        return Err(MetricError::TimeOutOfRange { t, duration: train.duration_ms() });
    }
    let aug = augment(train);
    let le = aug.partition_point(|&s| s <= t); // first index with aug[i] > t
    let at = aug[le - 1];
    if at == t {
        // On a spike: both corner times collapse onto t.
        let interval = if le < aug.len() { aug[le] - t } else { t - aug[le - 2] };
        Ok(CornerMeasures { previous: t, following: t, interval })
    } else {
        Ok(CornerMeasures { previous: at, following: aug[le], interval: aug[le] - at })
    }
}

fn s_value(a: CornerMeasures, b: CornerMeasures, t: f64) -> f64 {
    let xp = 0.5 * ((t - a.previous) + (t - b.previous));
    let xf = 0.5 * ((a.following - t) + (b.following - t));
    let dtp = (a.previous - b.previous).abs();
    let dtf = (a.following - b.following).abs();
    let xisi = 0.5 * (a.interval + b.interval);
    (dtp * xf + dtf * xp) / (xisi * xisi)
}

fn check_pair(a: &SpikeTrain, b: &SpikeTrain) -> Result<f64, MetricError> {
    if a.duration_ms() != b.duration_ms() {
        return Err(MetricError::DurationMismatch(a.duration_ms(), b.duration_ms()));
    }
    check_window(a.duration_ms())?;
    Ok(a.duration_ms())
}

/// Instantaneous dissimilarity of two trains at time `t`: 0 where their
/// spiking agrees locally, approaching 1 where it differs most.
pub fn instantaneous_spike_diff(a: &SpikeTrain, b: &SpikeTrain, t: f64) -> Result<f64, MetricError> {
    check_pair(a, b)?;
    Ok(s_value(corner_measures(a, t)?, corner_measures(b, t)?, t))
}

/// Corner measures for the fast path: `index` points at the latest
/// augmented spike `<= t`, maintained by the caller's sweep.
fn corners_at(aug: &[f64], index: usize, t: f64) -> CornerMeasures {
    if aug[index] == t {
        debug_assert!(index + 1 < aug.len());
        CornerMeasures { previous: t, following: t, interval: aug[index + 1] - t }
    } else {
        CornerMeasures {
            previous: aug[index],
            following: aug[index + 1],
            interval: aug[index + 1] - aug[index],
        }
    }
}

/// Time-averaged dissimilarity of two trains over a uniform sample grid.
///
/// The grid has `K = ceil(duration / eff)` points `t_k = k * duration / K`,
/// where `eff` is `sample_dt` shrunk to half the smallest inter-spike gap
/// whenever `sample_dt` would not resolve every interval. The result lies
/// in `[0, 1]`, is symmetric, and is 0 exactly for locally identical trains.
pub fn spike_distance(a: &SpikeTrain, b: &SpikeTrain, sample_dt: f64) -> Result<f64, MetricError> {
    let duration = check_pair(a, b)?;
    if !sample_dt.is_finite() || sample_dt <= 0.0 {
        return Err(MetricError::BadSampleInterval(sample_dt));
    }
    let aug_a = augment(a);
    let aug_b = augment(b);
    let gap = min_gap(&aug_a).min(min_gap(&aug_b));
    let eff = if sample_dt < gap { sample_dt } else { gap / 2.0 };
    let k_count = ((duration / eff).ceil() as u64).max(1);
    let delta = duration / k_count as f64;

    // Merged event times: every point where either profile changes slope.
    let mut events = Vec::with_capacity(aug_a.len() + aug_b.len());
    let (mut pa, mut pb) = (0, 0);
    while pa < aug_a.len() || pb < aug_b.len() {
        let next = match (aug_a.get(pa), aug_b.get(pb)) {
            (Some(&x), Some(&y)) => x.min(y),
            (Some(&x), None) => x,
            (None, Some(&y)) => y,
            (None, None) => unreachable!(),
        };
        while pa < aug_a.len() && aug_a[pa] == next {
            pa += 1;
        }
        while pb < aug_b.len() && aug_b[pb] == next {
            pb += 1;
        }
        events.push(next);
    }

    let last_k = k_count as i64 - 1;
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut sum = 0.0;
    for (m, &e) in events.iter().enumerate() {
        while ia + 1 < aug_a.len() && aug_a[ia + 1] <= e {
            ia += 1;
        }
        while ib + 1 < aug_b.len() && aug_b[ib + 1] <= e {
            ib += 1;
        }

        // Grid sample landing exactly on this event.
        let k_hit = (e / delta).round();
        if k_hit >= 0.0 && k_hit <= last_k as f64 && k_hit * delta == e {
            sum += s_value(corners_at(&aug_a, ia, e), corners_at(&aug_b, ib, e), e);
        }

        // Grid samples strictly inside (e, next event): the profile is
        // linear there, so the sample sum is an arithmetic series.
        let Some(&e1) = events.get(m + 1) else { continue };
        let mut k_lo = (e / delta).floor() as i64 + 1;
        while k_lo > 0 && (k_lo - 1) as f64 * delta > e {
            k_lo -= 1;
        }
        while k_lo as f64 * delta <= e {
            k_lo += 1;
        }
        let mut k_hi = (e1 / delta).ceil() as i64 - 1;
        while (k_hi + 1) as f64 * delta < e1 {
            k_hi += 1;
        }
        while k_hi >= 0 && k_hi as f64 * delta >= e1 {
            k_hi -= 1;
        }
        k_hi = k_hi.min(last_k);
        if k_lo <= k_hi {
            let ca = CornerMeasures {
                previous: aug_a[ia],
                following: aug_a[ia + 1],
                interval: aug_a[ia + 1] - aug_a[ia],
            };
            let cb = CornerMeasures {
                previous: aug_b[ib],
                following: aug_b[ib + 1],
                interval: aug_b[ib + 1] - aug_b[ib],
            };
            let s_first = s_value(ca, cb, k_lo as f64 * delta);
            let s_last = s_value(ca, cb, k_hi as f64 * delta);
            sum += (k_hi - k_lo + 1) as f64 * 0.5 * (s_first + s_last);
        }
    }
    Ok(sum / k_count as f64)
}

/// Symmetric pairwise distance matrix with row/column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    values: Vec<f64>,
    evaluations: usize,
}

impl DistanceMatrix {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n() + j]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Number of pairwise distance computations performed to fill the
    /// matrix: `n * (n - 1) / 2` — the diagonal is free and the upper
    /// triangle is mirrored.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Mean over unordered off-diagonal pairs; 0 for a single row.
    pub fn off_diagonal_mean(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let mut total = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                total += self.get(i, j);
            }
        }
        total / (n * (n - 1) / 2) as f64
    }

    /// Count of unordered pairs with distance at or above `threshold`.
    pub fn pairs_over(&self, threshold: f64) -> usize {
        let n = self.n();
        (0..n)
            .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
            .filter(|&(i, j)| self.get(i, j) >= threshold)
            .count()
    }

    /// Per-row count of other entries with distance at or above `threshold`.
    pub fn over_threshold_counts(&self, threshold: f64) -> Vec<usize> {
        let n = self.n();
        (0..n)
            .map(|i| (0..n).filter(|&j| j != i && self.get(i, j) >= threshold).count())
            .collect()
    }

    /// Write as CSV: header row of labels, one labelled row per train,
    /// distances with six decimal places.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        for label in &self.labels {
            write!(w, ",{}", csv_field(label))?;
        }
        writeln!(w)?;
        for i in 0..self.n() {
            write!(w, "{}", csv_field(&self.labels[i]))?;
            for j in 0..self.n() {
                write!(w, ",{:.6}", self.get(i, j))?;
            }
            writeln!(w)?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Pairwise distance matrix with labels `"0"`, `"1"`, ….
pub fn distance_matrix(trains: &[SpikeTrain], sample_dt: f64) -> Result<DistanceMatrix, MetricError> {
    let labels = (0..trains.len()).map(|i| i.to_string()).collect();
    distance_matrix_labeled(labels, trains, sample_dt)
}

/// Pairwise distance matrix with caller-supplied labels.
pub fn distance_matrix_labeled(
    labels: Vec<String>,
    trains: &[SpikeTrain],
    sample_dt: f64,
) -> Result<DistanceMatrix, MetricError> {
    if trains.is_empty() {
        return Err(MetricError::EmptyInput);
    }
    if labels.len() != trains.len() {
        return Err(MetricError::LabelMismatch(labels.len(), trains.len()));
    }
    if !sample_dt.is_finite() || sample_dt <= 0.0 {
        return Err(MetricError::BadSampleInterval(sample_dt));
    }
    let duration = trains[0].duration_ms();
    for t in trains {
        if t.duration_ms() != duration {
            return Err(MetricError::DurationMismatch(duration, t.duration_ms()));
        }
    }
    check_window(duration)?;

    let n = trains.len();
    let pairs: Vec<(usize, usize)> =
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).collect();
    let computed: Vec<Result<f64, MetricError>> = pairs
        .par_iter()
        .map(|&(i, j)| spike_distance(&trains[i], &trains[j], sample_dt))
        .collect();

    let mut values = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(computed) {
        let d = d?;
        values[i * n + j] = d;
        values[j * n + i] = d;
    }
    Ok(DistanceMatrix { labels, values, evaluations: pairs.len() })
}
