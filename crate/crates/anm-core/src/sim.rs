//! Discrete-time leaky integrate-and-fire simulation of tiled microcircuits.
//!
//! Time advances in fixed steps of `dt_ms`. Every synapse — internal and
//! input-channel alike — carries one step of delay: a spike fired (or
//! injected) at step `n` is integrated by its targets at step `n + 1`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::genome::TiledNetwork;

/// Number of external input channels every network exposes.
pub const INPUT_CHANNELS: usize = 8;

/// Errors from spike-train construction.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpikeTrainError {
    #[error("spike train duration must be finite and non-negative, got {0}")]
    BadDuration(f64),
    #[error("spike time at index {index} is not finite")]
    NonFinite { index: usize },
    #[error("spike time {time} at index {index} lies outside [0, {duration})")]
    OutOfRange { index: usize, time: f64, duration: f64 },
    #[error("spike times must be strictly increasing (violated at index {index})")]
    NotIncreasing { index: usize },
}

/// A sorted list of spike times over a fixed observation window `[0, duration_ms)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeTrain {
    duration_ms: f64,
    times: Vec<f64>,
}

impl SpikeTrain {
    /// Build a train, validating the window and the ordering of `times`.
    pub fn new(duration_ms: f64, times: Vec<f64>) -> Result<Self, SpikeTrainError> {
        if !duration_ms.is_finite() || duration_ms < 0.0 {
            return Err(SpikeTrainError::BadDuration(duration_ms));
        }
        for (index, &t) in times.iter().enumerate() {
            if !t.is_finite() {
                return Err(SpikeTrainError::NonFinite { index });
            }
            if t < 0.0 || t >= duration_ms {
                return Err(SpikeTrainError::OutOfRange { index, time: t, duration: duration_ms });
            }
            if index > 0 && times[index - 1] >= t {
                return Err(SpikeTrainError::NotIncreasing { index });
            }
        }
        Ok(SpikeTrain { duration_ms, times })
    }

    /// A train with no spikes.
    pub fn empty(duration_ms: f64) -> Result<Self, SpikeTrainError> {
        SpikeTrain::new(duration_ms, Vec::new())
    }

    pub fn duration_ms(&self) -> f64 {
        self.duration_ms
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Number of spikes.
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Neuron and integration parameters shared by every cell in a network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Membrane time constant in milliseconds.
    pub tau_ms: f64,
    /// Firing threshold potential.
    pub v_threshold: f64,
    /// Potential restored after a spike.
    pub v_reset: f64,
    /// Number of steps a neuron is blocked from firing after a spike.
    pub refractory_steps: u32,
    /// Integration step in milliseconds.
    pub dt_ms: f64,
}

impl Default for NeuronParams {
    fn default() -> Self {
        NeuronParams {
            tau_ms: 25.0,
            v_threshold: 1.5,
            v_reset: 0.0,
            refractory_steps: 1,
            dt_ms: 1.0,
        }
    }
}

impl NeuronParams {
    /// Reject non-finite or non-positive time constants and steps.
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.tau_ms.is_finite()
            && self.tau_ms > 0.0
            && self.dt_ms.is_finite()
            && self.dt_ms > 0.0
            && self.v_threshold.is_finite()
            && self.v_reset.is_finite()
            && self.v_reset < self.v_threshold;
        if ok {
            Ok(())
        } else {
            Err(SimError::BadParams(format!(
                "tau_ms={} v_threshold={} v_reset={} dt_ms={}",
                self.tau_ms, self.v_threshold, self.v_reset, self.dt_ms
            )))
        }
    }
}

/// Errors from network simulation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("expected {INPUT_CHANNELS} input channels, got {0}")]
    ChannelCount(usize),
    #[error("input channels disagree on duration ({0} ms vs {1} ms)")]
    DurationMismatch(f64, f64),
    #[error("invalid neuron parameters: {0}")]
    BadParams(String),
    #[error("output tap {tap} out of range for {neurons} neurons")]
    TapOutOfRange { tap: usize, neurons: usize },
    #[error(transparent)]
    Train(#[from] SpikeTrainError),
}

/// Simulation result with per-step membrane potentials retained.
#[derive(Debug, Clone)]
pub struct SimTrace {
    /// One spike train per output tap, in tap order.
    pub outputs: Vec<SpikeTrain>,
    /// `potentials[step][neuron]`: potential after integrating that step.
    pub potentials: Vec<Vec<f64>>,
}

/// Simulate a network against the eight input-channel spike trains and
/// return the spike trains observed at its output taps.
pub fn simulate(
    net: &TiledNetwork,
    inputs: &[SpikeTrain],
    params: &NeuronParams,
) -> Result<Vec<SpikeTrain>, SimError> {
    Ok(run(net, inputs, params, false)?.outputs)
}

/// As [`simulate`], additionally recording every neuron's potential at every
/// step. Intended for tests and inspection; the spike output is identical.
pub fn simulate_traced(
    net: &TiledNetwork,
    inputs: &[SpikeTrain],
    params: &NeuronParams,
) -> Result<SimTrace, SimError> {
    run(net, inputs, params, true)
}

fn run(
    net: &TiledNetwork,
    inputs: &[SpikeTrain],
    params: &NeuronParams,
    record_potentials: bool,
) -> Result<SimTrace, SimError> {
    params.validate()?;
    if inputs.len() != INPUT_CHANNELS {
        return Err(SimError::ChannelCount(inputs.len()));
    }
    let duration_ms = inputs[0].duration_ms();
    for train in &inputs[1..] {
        if train.duration_ms() != duration_ms {
            return Err(SimError::DurationMismatch(duration_ms, train.duration_ms()));
        }
    }
    let n = net.neuron_count;
    for &tap in &net.output_taps {
        if tap >= n {
            return Err(SimError::TapOutOfRange { tap, neurons: n });
        }
    }

    let dt = params.dt_ms;
    let steps = (duration_ms / dt).round() as usize;
    let decay = (-dt / params.tau_ms).exp();

    // Sparse adjacency, rebuilt once per call: synapse source -> (target, weight).
    let mut out_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for from in 0..n {
        for to in 0..n {
            let w = net.weight(from, to);
            if w != 0.0 {
                out_edges[from].push((to, w));
            }
        }
    }
    let mut channel_edges: Vec<Vec<(usize, f64)>> = vec![Vec::new(); INPUT_CHANNELS];
    for (channel, edges) in channel_edges.iter_mut().enumerate() {
        for to in 0..n {
            let w = net.input_weight(channel, to);
            if w != 0.0 {
                edges.push((to, w));
            }
        }
    }

    // Input spike step indices per channel.
    let input_steps: Vec<Vec<usize>> = inputs
        .iter()
        .map(|train| train.times().iter().map(|&t| (t / dt).round() as usize).collect())
        .collect();

    let mut v = vec![0.0f64; n];
    let mut refractory = vec![0u32; n];
    let mut drive = vec![0.0f64; n];
    let mut fired: Vec<usize> = Vec::new();
    let mut cursors = vec![0usize; INPUT_CHANNELS];
    let mut spike_times: Vec<Vec<f64>> = vec![Vec::new(); n];
    let mut tapped = vec![false; n];
    for &tap in &net.output_taps {
        tapped[tap] = true;
    }
    let mut potentials = Vec::new();

    for step in 0..steps {
        // Deliver spikes emitted or injected at the previous step.
        drive.iter_mut().for_each(|d| *d = 0.0);
        if step > 0 {
            for (channel, steps_for_channel) in input_steps.iter().enumerate() {
                let cursor = &mut cursors[channel];
                while *cursor < steps_for_channel.len() && steps_for_channel[*cursor] < step - 1 {
                    *cursor += 1;
                }
                if *cursor < steps_for_channel.len() && steps_for_channel[*cursor] == step - 1 {
                    for &(to, w) in &channel_edges[channel] {
                        drive[to] += w;
                    }
                    *cursor += 1;
                }
            }
            for &from in &fired {
                for &(to, w) in &out_edges[from] {
                    drive[to] += w;
                }
            }
        }

        fired.clear();
        for i in 0..n {
            v[i] = v[i] * decay + drive[i];
            if refractory[i] > 0 {
                refractory[i] -= 1;
            } else if v[i] >= params.v_threshold {
                v[i] = params.v_reset;
                refractory[i] = params.refractory_steps;
                fired.push(i);
                if tapped[i] {
                    spike_times[i].push(step as f64 * dt);
                }
            }
        }
        if record_potentials {
            potentials.push(v.clone());
        }
    }

    let outputs = net
        .output_taps
        .iter()
        .map(|&tap| SpikeTrain::new(duration_ms, spike_times[tap].clone()))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SimTrace { outputs, potentials })
}
