//! Two-layer spiking network: LIF input layer, fully connected memristive
//! synapses, adaptive LIF output layer under hard winner-take-all, and
//! voltage-dependent plasticity triggered by output spikes.

mod snapshot;
mod synapse;
mod vdsp;

pub use snapshot::{
    read_snapshot, write_pgm_maps, write_snapshot, write_weights_csv, SnapshotMeta,
};
pub use synapse::{SynapseMatrix, UpdateCounts};
pub use vdsp::{prog_voltage, VdspConfig, VoltageMap};

use rand::Rng;
use serde::Serialize;

use crate::device::{
    sample_instances, DeviceParams, Preset, StuckFraction, VariabilitySpec, WeightState,
};
use crate::encoding::CurrentSource;
use crate::error::{Error, Result};
use crate::neuron::{AlifKernel, AlifParams, AlifState, LifKernel, LifParams, LifState};
use crate::scalar::Scalar;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkConfig<T> {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub input: LifParams<T>,
    pub output: AlifParams<T>,
    /// Lateral inhibition window after any output spike (s).
    pub t_wta: T,
    pub dt: T,
    pub vdsp: VdspConfig<T>,
    pub device: DeviceParams<T>,
    /// Label used in snapshots and result records.
    pub device_name: String,
    pub variability: VariabilitySpec,
    pub synapse_gain: T,
    /// Where input membranes start each sample.
    pub input_start: InputStart,
    pub seed: u64,
}

/// Initial input membrane at the start of every sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum InputStart {
    /// `v_rest`.
    Rest,
    /// The zero-input steady state `v_rest + b`, kept below threshold.
    #[default]
    Biased,
}

impl InputStart {
    pub fn name(self) -> &'static str {
        match self {
            InputStart::Rest => "rest",
            InputStart::Biased => "biased",
        }
    }

    /// Starting membrane for an input neuron with parameters `p`.
    pub fn potential<T: Scalar>(self, p: &LifParams<T>) -> T {
        match self {
            InputStart::Rest => p.v_rest,
            InputStart::Biased => {
                let top = p.v_th - (p.v_th - p.v_rest) * T::of(1e-6);
                (p.v_rest + p.bias).max(p.v_reset).min(top)
            }
        }
    }
}

impl std::str::FromStr for InputStart {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rest" => Ok(InputStart::Rest),
            "biased" => Ok(InputStart::Biased),
            _ => Err(Error::Input(format!(
                "unknown input start `{s}` (rest|biased)"
            ))),
        }
    }
}

impl<T: Scalar> NetworkConfig<T> {
    /// Defaults for a 784-input network on a preset device.
    pub fn mnist(preset: Preset, n_outputs: usize) -> Self {
        let device = preset.params();
        NetworkConfig {
            n_inputs: crate::data::PIXELS,
            n_outputs,
            input: LifParams::input_layer(),
            output: AlifParams::output_layer(),
            t_wta: T::of(0.012),
            dt: T::of(0.001),
            vdsp: VdspConfig::new(T::of(preset.default_sf_p()), device.sf_pd),
            device,
            device_name: preset.name().to_string(),
            variability: VariabilitySpec::none(),
            synapse_gain: T::of(preset.default_synapse_gain()),
            input_start: InputStart::default(),
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_inputs == 0 {
            return Err(Error::validation("n_inputs", "must be >= 1"));
        }
        if self.n_outputs == 0 {
            return Err(Error::validation("n_outputs", "must be >= 1"));
        }
        if !(self.t_wta >= T::zero()) {
            return Err(Error::validation("t_wta", "must be >= 0"));
        }
        if !(self.dt > T::zero()) {
            return Err(Error::validation("dt", "must be > 0"));
        }
        if !self.synapse_gain.is_finite() {
            return Err(Error::validation("synapse_gain", "must be finite"));
        }
        self.input.validate()?;
        self.output.validate()?;
        self.vdsp.validate()?;
        self.device.validate()?;
        self.variability.validate()
    }

    pub fn steps_for(&self, duration: T) -> usize {
        (duration / self.dt).round().to_usize().unwrap_or(0)
    }
}

/// Running totals over the network's lifetime.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct NetworkStats {
    pub steps: u64,
    pub input_spikes: u64,
    pub output_spikes: u64,
    pub updates: UpdateCounts,
}

/// What happened in one step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome<'a> {
    pub input_spikes: &'a [usize],
    /// The output neuron that fired, if any (at most one under WTA).
    pub output_spike: Option<usize>,
    pub updates: Option<UpdateCounts>,
}

/// Response to one presented sample.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResponse {
    pub counts: Vec<u32>,
    /// Step of each neuron's first spike, if it fired.
    pub first_spike: Vec<Option<u32>>,
    pub input_spikes: u64,
    pub updates: UpdateCounts,
}

impl SampleResponse {
    pub fn total_spikes(&self) -> u32 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone)]
pub struct Network<T> {
    config: NetworkConfig<T>,
    input_kernel: LifKernel<T>,
    output_kernel: AlifKernel<T>,
    map: VoltageMap<T>,
    wta_steps: u32,
    inputs: Vec<LifState<T>>,
    outputs: Vec<AlifState<T>>,
    synapses: SynapseMatrix<T>,
    wta_remaining: u32,
    stats: NetworkStats,
    currents: Vec<T>,
    drive: Vec<T>,
    candidates: Vec<T>,
    active: Vec<usize>,
    volts: Vec<T>,
}

impl<T: Scalar> Network<T> {
    /// Fresh network: uniform random weights and sampled device instances.
    pub fn build(config: NetworkConfig<T>) -> Result<Self> {
        config.validate()?;
        let n = config.n_inputs * config.n_outputs;
        let mut rng = seed::rng(seed::child(config.seed, seed::stream::WEIGHTS, 0));
        let weights: Vec<WeightState<T>> = (0..n)
            .map(|_| WeightState::clamped(T::of(rng.random::<f64>())))
            .collect();
        Self::with_weights(config, weights)
    }

    /// Network with given row-major (`n_inputs × n_outputs`) weights.
    pub fn with_weights(config: NetworkConfig<T>, weights: Vec<WeightState<T>>) -> Result<Self> {
        config.validate()?;
        let n = config.n_inputs * config.n_outputs;
        if weights.len() != n {
            return Err(Error::Config(format!(
                "expected {n} weights for {}x{}, got {}",
                config.n_inputs,
                config.n_outputs,
                weights.len()
            )));
        }
        let instances = sample_instances(
            &config.device,
            &config.variability,
            n,
            seed::child(config.seed, seed::stream::INSTANCES, 0),
        )?;
        let synapses = SynapseMatrix::new(
            config.n_inputs,
            config.n_outputs,
            weights,
            &instances,
            config.device,
        );
        let input_kernel = LifKernel::new(config.input, config.dt)?;
        let output_kernel = AlifKernel::new(config.output, config.dt)?;
        let map = VoltageMap::new(&config.vdsp, config.input.v_th, &config.device)?;
        let wta_steps = config.steps_for(config.t_wta) as u32;
        Ok(Network {
            inputs: vec![LifState::at_rest(&config.input); config.n_inputs],
            outputs: vec![AlifState::at_rest(&config.output); config.n_outputs],
            currents: vec![T::zero(); config.n_inputs],
            drive: vec![T::zero(); config.n_outputs],
            candidates: vec![T::zero(); config.n_outputs],
            active: Vec::with_capacity(config.n_inputs),
            volts: vec![T::zero(); config.n_inputs],
            input_kernel,
            output_kernel,
            map,
            wta_steps,
            synapses,
            wta_remaining: 0,
            stats: NetworkStats::default(),
            config,
        })
    }

    pub fn config(&self) -> &NetworkConfig<T> {
        &self.config
    }

    pub fn synapses(&self) -> &SynapseMatrix<T> {
        &self.synapses
    }

    pub fn synapses_mut(&mut self) -> &mut SynapseMatrix<T> {
        &mut self.synapses
    }

    pub fn stats(&self) -> NetworkStats {
        self.stats
    }

    pub fn input_states(&self) -> &[LifState<T>] {
        &self.inputs
    }

    pub fn input_states_mut(&mut self) -> &mut [LifState<T>] {
        &mut self.inputs
    }

    pub fn output_states(&self) -> &[AlifState<T>] {
        &self.outputs
    }

    pub fn voltage_map(&self) -> &VoltageMap<T> {
        &self.map
    }

    /// Devices unreachable by the largest programming voltage.
    pub fn stuck_fraction(&self) -> StuckFraction {
        self.synapses
            .stuck_fraction(self.map.max_pot(), self.map.max_dep())
    }

    /// Membranes to their start values (see [`InputStart`]), refractory and
    /// inhibition timers cleared. Adaptation is kept.
    pub fn reset_transient(&mut self) {
        let mut rest_in = LifState::at_rest(&self.config.input);
        rest_in.v = self.config.input_start.potential(&self.config.input);
        self.inputs.iter_mut().for_each(|s| *s = rest_in);
        let rest_out = LifState::at_rest(&self.config.output.lif);
        self.outputs.iter_mut().for_each(|s| s.lif = rest_out);
        self.wta_remaining = 0;
    }

    pub fn reset_adaptation(&mut self) {
        self.outputs.iter_mut().for_each(|s| s.n = T::zero());
    }

    /// Program every synapse onto output `post` from the current
    /// presynaptic membranes.
    pub fn vdsp_update(&mut self, post: usize) -> UpdateCounts {
        for (v, s) in self.volts.iter_mut().zip(&self.inputs) {
            *v = self.map.voltage(s.v);
        }
        let counts = self.synapses.program_column(post, &self.volts);
        self.stats.updates += counts;
        counts
    }

    /// Advance one `dt` with the given input currents.
    pub fn step(&mut self, currents: &[T], learning: bool) -> StepOutcome<'_> {
        assert_eq!(currents.len(), self.config.n_inputs, "input current count");
        self.stats.steps += 1;

        self.active.clear();
        for (j, (state, &i)) in self.inputs.iter_mut().zip(currents).enumerate() {
            if self.input_kernel.step(state, i) {
                self.active.push(j);
            }
        }
        self.stats.input_spikes += self.active.len() as u64;

        let kernel = &self.output_kernel;
        let mut winner = None;
        if self.wta_remaining > 0 {
            self.wta_remaining -= 1;
            for s in self.outputs.iter_mut() {
                kernel.decay_adaptation(s);
                kernel.lif.hold(&mut s.lif);
            }
        } else {
            if self.active.is_empty() {
                self.drive.iter_mut().for_each(|d| *d = T::zero());
            } else {
                self.synapses
                    .accumulate(&self.active, self.config.synapse_gain, &mut self.drive);
            }
            let mut best: Option<(usize, T)> = None;
            for (k, s) in self.outputs.iter_mut().enumerate() {
                kernel.decay_adaptation(s);
                if kernel.lif.is_refractory(&s.lif) {
                    kernel.lif.hold(&mut s.lif);
                    self.candidates[k] = s.lif.v;
                    continue;
                }
                let v = kernel.candidate(s, self.drive[k]);
                self.candidates[k] = v;
                if v >= kernel.threshold(s) && best.is_none_or(|(_, bv)| v > bv) {
                    best = Some((k, v));
                }
            }
            match best {
                Some((k, _)) => {
                    for s in self.outputs.iter_mut() {
                        kernel.lif.hold(&mut s.lif);
                    }
                    let s = &mut self.outputs[k];
                    kernel.lif.fire(&mut s.lif);
                    s.n = s.n + kernel.inc_n;
                    self.wta_remaining = self.wta_steps;
                    self.stats.output_spikes += 1;
                    winner = Some(k);
                }
                None => {
                    for (s, &v) in self.outputs.iter_mut().zip(&self.candidates) {
                        s.lif.v = v;
                    }
                }
            }
        }

        let updates = match winner {
            Some(k) if learning => Some(self.vdsp_update(k)),
            _ => None,
        };
        StepOutcome {
            input_spikes: &self.active,
            output_spike: winner,
            updates,
        }
    }

    /// Present one sample for `steps` steps after resetting transient state.
    pub fn present(
        &mut self,
        source: &mut impl CurrentSource<T>,
        steps: usize,
        learning: bool,
    ) -> SampleResponse {
        assert_eq!(source.len(), self.config.n_inputs, "current source width");
        self.reset_transient();
        let mut response = SampleResponse {
            counts: vec![0; self.config.n_outputs],
            first_spike: vec![None; self.config.n_outputs],
            input_spikes: 0,
            updates: UpdateCounts::default(),
        };
        let mut currents = std::mem::take(&mut self.currents);
        for t in 0..steps {
            source.fill(&mut currents);
            let out = self.step(&currents, learning);
            response.input_spikes += out.input_spikes.len() as u64;
            if let Some(k) = out.output_spike {
                response.counts[k] += 1;
                response.first_spike[k].get_or_insert(t as u32);
            }
            if let Some(u) = out.updates {
                response.updates += u;
            }
        }
        self.currents = currents;
        response
    }

    /// [`Network::present`] with the duration given in seconds.
    pub fn present_sample(
        &mut self,
        source: &mut impl CurrentSource<T>,
        duration: T,
        learning: bool,
    ) -> Result<SampleResponse> {
        if !(duration >= self.config.dt) {
            return Err(Error::Input(format!(
                "sample duration {duration} shorter than dt {}",
                self.config.dt
            )));
        }
        let steps = self.config.steps_for(duration);
        Ok(self.present(source, steps, learning))
    }
}

pub fn build_network<T: Scalar>(config: NetworkConfig<T>) -> Result<Network<T>> {
    Network::build(config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::encoding::ConstantCurrents;

    fn small(n_in: usize, n_out: usize) -> NetworkConfig<f64> {
        let mut cfg = NetworkConfig::mnist(Preset::TiO2, n_out);
        cfg.n_inputs = n_in;
        cfg.seed = 3;
        cfg
    }

    #[test]
    fn blank_input_is_silent() {
        let mut net = Network::build(small(16, 4)).unwrap();
        let mut src = ConstantCurrents(vec![0.0; 16]);
        let r = net.present(&mut src, 40, true);
        assert_eq!(r.input_spikes, 0);
        assert_eq!(r.total_spikes(), 0);
        assert_eq!(r.updates, UpdateCounts::default());
    }

    #[test]
    fn saturated_pixels_fire_at_most_three_times() {
        let mut net = Network::build(small(8, 2)).unwrap();
        let mut src = ConstantCurrents(vec![3.5; 8]);
        let r = net.present(&mut src, 40, false);
        assert!(
            r.input_spikes > 0 && r.input_spikes <= 3 * 8,
            "{}",
            r.input_spikes
        );
    }

    #[test]
    fn one_winner_then_inhibition() {
        let mut cfg = small(64, 5);
        cfg.synapse_gain = 4.0;
        let mut net = Network::build(cfg).unwrap();
        let wta = net.config().steps_for(net.config().t_wta);
        let currents = vec![3.5; 64];
        let mut last: Option<usize> = None;
        let mut spikes = 0;
        for t in 0..400 {
            let out = net.step(&currents, true);
            if let Some(k) = out.output_spike {
                assert!(k < 5);
                if let Some(prev) = last {
                    assert!(t - prev > wta, "spike at {t} inside window after {prev}");
                }
                assert!(out.updates.is_some());
                last = Some(t);
                spikes += 1;
            }
        }
        assert!(spikes > 3);
        // Adaptation was charged and survives the transient reset.
        let n_before: Vec<f64> = net.output_states().iter().map(|s| s.n).collect();
        assert!(n_before.iter().any(|&n| n > 0.0));
        net.reset_transient();
        assert_eq!(
            net.output_states().iter().map(|s| s.n).collect::<Vec<_>>(),
            n_before
        );
        net.reset_adaptation();
        assert!(net.output_states().iter().all(|s| s.n == 0.0));
    }

    #[test]
    fn no_learning_leaves_weights() {
        let mut cfg = small(64, 3);
        cfg.synapse_gain = 4.0;
        let mut net = Network::build(cfg).unwrap();
        let before = net.synapses().weights().to_vec();
        let mut src = ConstantCurrents(vec![3.5; 64]);
        let r = net.present(&mut src, 200, false);
        assert!(r.total_spikes() > 0);
        assert_eq!(net.synapses().weights(), &before[..]);
    }

    #[test]
    fn initial_weights_are_uniform() {
        let net = Network::build(small(784, 50)).unwrap();
        let mut w = net.synapses().weights().to_vec();
        w.sort_by(f64::total_cmp);
        let n = w.len() as f64;
        let ks = w
            .iter()
            .enumerate()
            .map(|(i, &x)| ((i + 1) as f64 / n - x).abs().max((x - i as f64 / n).abs()))
            .fold(0.0, f64::max);
        // 1% critical value 1.63/sqrt(n).
        assert!(ks < 1.63 / n.sqrt(), "KS {ks}");
    }

    #[test]
    fn same_seed_same_network() {
        let run = || {
            let mut cfg = small(32, 4);
            cfg.synapse_gain = 4.0;
            cfg.variability.rsd_theta = 0.1;
            let mut net = Network::build(cfg).unwrap();
            let mut src = ConstantCurrents((0..32).map(|i| (i % 4) as f64).collect());
            for _ in 0..5 {
                net.present(&mut src, 40, true);
            }
            (net.synapses().weights().to_vec(), net.stats())
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn biased_start_sits_at_equilibrium() {
        let mut cfg = small(4, 1);
        cfg.input.bias = 0.9;
        let mut net = Network::build(cfg.clone()).unwrap();
        net.reset_transient();
        assert!(net.input_states().iter().all(|s| (s.v - 0.9).abs() < 1e-15));
        // Stays there with zero input.
        net.step(&[0.0; 4], false);
        assert!(net.input_states().iter().all(|s| (s.v - 0.9).abs() < 1e-12));

        cfg.input_start = InputStart::Rest;
        let mut net = Network::build(cfg.clone()).unwrap();
        net.reset_transient();
        assert!(net.input_states().iter().all(|s| s.v == 0.0));
        // A bias at or above threshold is held just below it.
        assert!(
            InputStart::Biased.potential(&LifParams {
                bias: 2.0,
                ..cfg.input
            }) < 1.0
        );
    }
}
