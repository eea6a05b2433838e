//! Discrete-time LIF and adaptive LIF neurons with exact-leak integration.
//!
//! Between events the membrane obeys `τ dv/dt = −(v − v_rest) + I + b`; for
//! input held constant over a step of length `dt` the update
//! `v' = v_rest + (v − v_rest)·e^(−dt/τ) + (I + b)·(1 − e^(−dt/τ))` is the
//! exact solution.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifParams<T> {
    /// Membrane leak time constant (s).
    pub tau_mem: T,
    pub v_th: T,
    pub v_reset: T,
    pub v_rest: T,
    /// Refractory period (s).
    pub t_ref: T,
    /// Constant bias `b` added to the input.
    pub bias: T,
}

impl<T: Scalar> LifParams<T> {
    /// Input layer: hyperpolarizing reset to −1, so a recently fired neuron
    /// is distinguishable from one idling at rest.
    pub fn input_layer() -> Self {
        LifParams {
            tau_mem: T::of(0.030),
            v_th: T::one(),
            v_reset: -T::one(),
            v_rest: T::zero(),
            t_ref: T::of(0.003),
            bias: T::zero(),
        }
    }

    pub fn output_layer() -> Self {
        LifParams {
            tau_mem: T::of(0.012),
            v_th: T::of(8.0),
            v_reset: T::zero(),
            v_rest: T::zero(),
            t_ref: T::of(0.003),
            bias: T::zero(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tau_mem > T::zero()) {
            return Err(Error::validation("tau_mem", "must be > 0"));
        }
        if !(self.t_ref >= T::zero()) {
            return Err(Error::validation("t_ref", "must be >= 0"));
        }
        if !(self.v_reset < self.v_th) {
            return Err(Error::validation("v_reset", "must be below v_th"));
        }
        if !(self.v_rest >= self.v_reset && self.v_rest < self.v_th) {
            return Err(Error::validation("v_rest", "must lie in [v_reset, v_th)"));
        }
        if !self.bias.is_finite() {
            return Err(Error::validation("bias", "must be finite"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifState<T> {
    pub v: T,
    /// Remaining refractory time (s).
    pub refractory: T,
}

impl<T: Scalar> LifState<T> {
    pub fn at_rest(params: &LifParams<T>) -> Self {
        LifState {
            v: params.v_rest,
            refractory: T::zero(),
        }
    }
}

/// Per-`dt` constants of a LIF population, so the hot loop does no `exp`.
#[derive(Debug, Clone, Copy)]
pub struct LifKernel<T> {
    pub params: LifParams<T>,
    pub dt: T,
    decay: T,
    gain: T,
    /// Refractory remainders below this count as expired (absorbs rounding).
    eps: T,
}

impl<T: Scalar> LifKernel<T> {
    pub fn new(params: LifParams<T>, dt: T) -> Result<Self> {
        params.validate()?;
        if !(dt > T::zero() && dt.is_finite()) {
            return Err(Error::Input(format!("dt must be > 0, got {dt}")));
        }
        let decay = (-dt / params.tau_mem).exp();
        Ok(LifKernel {
            params,
            dt,
            decay,
            gain: T::one() - decay,
            eps: dt * T::of(1e-6),
        })
    }

    /// Advance one step with threshold `v_th`. Returns whether it spiked.
    #[inline(always)]
    pub fn advance(&self, state: &mut LifState<T>, input: T, v_th: T) -> bool {
        if state.refractory > self.eps {
            state.v = self.params.v_reset;
            state.refractory = state.refractory - self.dt;
            if state.refractory <= self.eps {
                state.refractory = T::zero();
            }
            return false;
        }
        let rest = self.params.v_rest;
        let v = rest + (state.v - rest) * self.decay + (input + self.params.bias) * self.gain;
        if v >= v_th {
            state.v = self.params.v_reset;
            state.refractory = self.params.t_ref;
            true
        } else {
            state.v = v;
            false
        }
    }

    #[inline(always)]
    pub fn step(&self, state: &mut LifState<T>, input: T) -> bool {
        self.advance(state, input, self.params.v_th)
    }

    /// Inhibited step: membrane pinned at reset, refractory keeps running.
    #[inline(always)]
    pub fn hold(&self, state: &mut LifState<T>) {
        state.v = self.params.v_reset;
        if state.refractory > self.eps {
            state.refractory = state.refractory - self.dt;
        }
        if state.refractory <= self.eps {
            state.refractory = T::zero();
        }
    }

    #[inline(always)]
    pub fn is_refractory(&self, state: &LifState<T>) -> bool {
        state.refractory > self.eps
    }

    /// Put the neuron into its post-spike state.
    #[inline(always)]
    pub fn fire(&self, state: &mut LifState<T>) {
        state.v = self.params.v_reset;
        state.refractory = self.params.t_ref;
    }
}

/// One LIF update. Errors on non-finite input or non-positive `dt`.
pub fn lif_step<T: Scalar>(
    state: LifState<T>,
    input: T,
    dt: T,
    params: &LifParams<T>,
) -> Result<(LifState<T>, bool)> {
    if !input.is_finite() {
        return Err(Error::Input(format!(
            "input current must be finite, got {input}"
        )));
    }
    let kernel = LifKernel::new(*params, dt)?;
    let mut next = state;
    let spiked = kernel.step(&mut next, input);
    Ok((next, spiked))
}

/// How the adaptation variable acts on the neuron.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum AdaptationMode {
    /// `n` is subtracted from the input current.
    #[default]
    #[serde(rename = "current")]
    SubtractCurrent,
    /// `n` is added to the firing threshold.
    #[serde(rename = "threshold")]
    RaiseThreshold,
}

impl std::str::FromStr for AdaptationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "current" => Ok(AdaptationMode::SubtractCurrent),
            "threshold" => Ok(AdaptationMode::RaiseThreshold),
            other => Err(Error::Config(format!(
                "unknown adaptation mode `{other}` (expected current or threshold)"
            ))),
        }
    }
}

impl AdaptationMode {
    pub fn name(self) -> &'static str {
        match self {
            AdaptationMode::SubtractCurrent => "current",
            AdaptationMode::RaiseThreshold => "threshold",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlifParams<T> {
    pub lif: LifParams<T>,
    pub inc_n: T,
    /// Adaptation decay time constant (s).
    pub tau_adap: T,
    pub mode: AdaptationMode,
}

impl<T: Scalar> AlifParams<T> {
    pub fn output_layer() -> Self {
        AlifParams {
            lif: LifParams::output_layer(),
            inc_n: T::one(),
            tau_adap: T::of(0.120),
            mode: AdaptationMode::SubtractCurrent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.lif.validate()?;
        if !(self.inc_n >= T::zero()) {
            return Err(Error::validation("inc_n", "must be >= 0"));
        }
        if !(self.tau_adap > T::zero()) {
            return Err(Error::validation("tau_adap", "must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlifState<T> {
    pub lif: LifState<T>,
    /// Adaptation variable, never negative.
    pub n: T,
}

impl<T: Scalar> AlifState<T> {
    pub fn at_rest(params: &AlifParams<T>) -> Self {
        AlifState {
            lif: LifState::at_rest(&params.lif),
            n: T::zero(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AlifKernel<T> {
    pub lif: LifKernel<T>,
    pub inc_n: T,
    pub mode: AdaptationMode,
    adap_decay: T,
}

impl<T: Scalar> AlifKernel<T> {
    pub fn new(params: AlifParams<T>, dt: T) -> Result<Self> {
        params.validate()?;
        Ok(AlifKernel {
            lif: LifKernel::new(params.lif, dt)?,
            inc_n: params.inc_n,
            mode: params.mode,
            adap_decay: (-dt / params.tau_adap).exp(),
        })
    }

    /// Decay `n` by one step without touching the membrane.
    #[inline(always)]
    pub fn decay_adaptation(&self, state: &mut AlifState<T>) {
        state.n = state.n * self.adap_decay;
    }

    /// Membrane value the neuron would reach this step if it integrated
    /// `input` (after the adaptation decay already applied to `state.n`),
    /// ignoring threshold and refractoriness.
    #[inline(always)]
    pub fn candidate(&self, state: &AlifState<T>, input: T) -> T {
        let drive = match self.mode {
            AdaptationMode::SubtractCurrent => input - state.n,
            AdaptationMode::RaiseThreshold => input,
        };
        let rest = self.lif.params.v_rest;
        rest + (state.lif.v - rest) * self.lif.decay
            + (drive + self.lif.params.bias) * self.lif.gain
    }

    #[inline(always)]
    pub fn threshold(&self, state: &AlifState<T>) -> T {
        match self.mode {
            AdaptationMode::SubtractCurrent => self.lif.params.v_th,
            AdaptationMode::RaiseThreshold => self.lif.params.v_th + state.n,
        }
    }

    #[inline(always)]
    pub fn step(&self, state: &mut AlifState<T>, input: T) -> bool {
        self.decay_adaptation(state);
        let (drive, v_th) = match self.mode {
            AdaptationMode::SubtractCurrent => (input - state.n, self.lif.params.v_th),
            AdaptationMode::RaiseThreshold => (input, self.lif.params.v_th + state.n),
        };
        let spiked = self.lif.advance(&mut state.lif, drive, v_th);
        if spiked {
            state.n = state.n + self.inc_n;
        }
        spiked
    }
}

pub fn alif_step<T: Scalar>(
    state: AlifState<T>,
    input: T,
    dt: T,
    params: &AlifParams<T>,
) -> Result<(AlifState<T>, bool)> {
    if !input.is_finite() {
        return Err(Error::Input(format!(
            "input current must be finite, got {input}"
        )));
    }
    let kernel = AlifKernel::new(*params, dt)?;
    let mut next = state;
    let spiked = kernel.step(&mut next, input);
    Ok((next, spiked))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TracePoint<T> {
    pub t: T,
    pub v: T,
    pub spiked: bool,
}

/// Membrane trace under constant input, starting at rest. The first point is
/// the initial state at `t = 0`.
pub fn membrane_trajectory<T: Scalar>(
    params: &LifParams<T>,
    input: T,
    duration: T,
    dt: T,
) -> Result<Vec<TracePoint<T>>> {
    membrane_trajectory_from(params, LifState::at_rest(params), input, duration, dt)
}

pub fn membrane_trajectory_from<T: Scalar>(
    params: &LifParams<T>,
    start: LifState<T>,
    input: T,
    duration: T,
    dt: T,
) -> Result<Vec<TracePoint<T>>> {
    if !input.is_finite() {
        return Err(Error::Input(format!(
            "input current must be finite, got {input}"
        )));
    }
    let kernel = LifKernel::new(*params, dt)?;
    if !(duration >= dt) {
        return Err(Error::Input(format!(
            "duration {duration} shorter than dt {dt}"
        )));
    }
    let steps = (duration / dt).round().to_usize().unwrap_or(0);
    let mut state = start;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(TracePoint {
        t: T::zero(),
        v: state.v,
        spiked: false,
    });
    for k in 1..=steps {
        let spiked = kernel.step(&mut state, input);
        out.push(TracePoint {
            t: T::of(k as f64) * dt,
            v: state.v,
            spiked,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_lif() -> LifParams<f64> {
        LifParams {
            tau_mem: 0.030,
            v_th: 1.0,
            v_reset: -1.0,
            v_rest: 0.0,
            t_ref: 0.003,
            bias: 0.0,
        }
    }

    #[test]
    fn single_step_matches_closed_form() {
        let p = unit_lif();
        let (s, spiked) = lif_step(LifState::at_rest(&p), 2.0, 0.001, &p).unwrap();
        assert!(!spiked);
        assert!((s.v - 0.065_567_799_035_988_2).abs() < 1e-14);
    }

    #[test]
    fn bias_and_current_are_interchangeable() {
        let mut p = unit_lif();
        p.bias = 0.5;
        let (a, _) = lif_step(LifState::at_rest(&p), 1.5, 0.001, &p).unwrap();
        let (b, _) = lif_step(LifState::at_rest(&unit_lif()), 2.0, 0.001, &unit_lif()).unwrap();
        assert!((a.v - b.v).abs() < 1e-15);
    }

    #[test]
    fn leak_only_never_spikes() {
        let p = unit_lif();
        let start = LifState {
            v: 0.5,
            refractory: 0.0,
        };
        let trace = membrane_trajectory_from(&p, start, 0.0, 0.2, 0.001).unwrap();
        assert!(trace.windows(2).all(|w| w[1].v < w[0].v));
        assert!(trace.iter().all(|t| !t.spiked));
    }

    #[test]
    fn first_spike_time() {
        let p = unit_lif();
        let trace = membrane_trajectory(&p, 2.0, 0.1, 0.001).unwrap();
        let first = trace.iter().find(|t| t.spiked).unwrap().t;
        let expected = 0.030 * 2f64.ln();
        assert!((first - expected).abs() <= 0.001 + 1e-12, "{first}");
    }

    #[test]
    fn refractory_pins_at_reset() {
        let p = unit_lif();
        let trace = membrane_trajectory(&p, 5.0, 0.1, 0.001).unwrap();
        let spikes: Vec<usize> = (0..trace.len()).filter(|&i| trace[i].spiked).collect();
        let first = spikes[0];
        for k in 1..=3 {
            assert_eq!(trace[first + k].v, -1.0);
            assert!(!trace[first + k].spiked);
        }
        assert!(spikes.windows(2).all(|w| w[1] - w[0] > 3));
    }

    #[test]
    fn non_finite_input_rejected() {
        let p = unit_lif();
        assert!(lif_step(LifState::at_rest(&p), f64::NAN, 0.001, &p).is_err());
        assert!(lif_step(LifState::at_rest(&p), 1.0, 0.0, &p).is_err());
        let a = AlifParams::<f64>::output_layer();
        assert!(alif_step(AlifState::at_rest(&a), f64::INFINITY, 0.001, &a).is_err());
    }

    #[test]
    fn adaptation_decays_exponentially() {
        let p = AlifParams::<f64>::output_layer();
        let state = AlifState {
            lif: LifState::at_rest(&p.lif),
            n: 1.0,
        };
        let (s, spiked) = alif_step(state, 0.0, 0.120, &p).unwrap();
        assert!(!spiked);
        assert!((s.n - (-1f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn alif_without_increment_is_lif() {
        let mut a = AlifParams::<f64>::output_layer();
        a.inc_n = 0.0;
        a.lif = unit_lif();
        let lif = LifKernel::new(unit_lif(), 0.001).unwrap();
        let alif = AlifKernel::new(a, 0.001).unwrap();
        let mut ls = LifState::at_rest(&a.lif);
        let mut als = AlifState::at_rest(&a);
        for k in 0..500 {
            let input = 1.0 + (k as f64 * 0.37).sin() * 2.0;
            assert_eq!(lif.step(&mut ls, input), alif.step(&mut als, input));
            assert_eq!(ls.v.to_bits(), als.lif.v.to_bits());
        }
    }

    #[test]
    fn adaptation_stretches_intervals() {
        for mode in [
            AdaptationMode::SubtractCurrent,
            AdaptationMode::RaiseThreshold,
        ] {
            let mut a = AlifParams::<f64>::output_layer();
            a.mode = mode;
            let kernel = AlifKernel::new(a, 0.001).unwrap();
            let mut s = AlifState::at_rest(&a);
            let mut spikes = Vec::new();
            for k in 0..2000 {
                if kernel.step(&mut s, 12.0) {
                    spikes.push(k);
                }
                if spikes.len() == 6 {
                    break;
                }
            }
            assert_eq!(spikes.len(), 6, "{mode:?}");
            let isi: Vec<usize> = spikes.windows(2).map(|w| w[1] - w[0]).collect();
            assert!(isi.windows(2).all(|w| w[1] >= w[0]), "{mode:?} {isi:?}");
            assert!(isi[4] > isi[0]);
        }
    }

    #[test]
    fn param_validation() {
        let mut p = unit_lif();
        p.v_rest = 2.0;
        assert!(p.validate().is_err());
        let mut p = unit_lif();
        p.tau_mem = 0.0;
        assert!(p.validate().is_err());
    }
}
