//! Voltage-dependent memristor switching model.
//!
//! A write pulse of amplitude `v` changes the normalized conductance `w` by
//!
//! ```text
//! Δw = +f_p(v) · (1 − w)^γp      v ≤ −θp          (potentiation)
//! Δw = −f_d(v) · w^γd            v ≥ +θd          (depression)
//! Δw = 0                         −θp < v < +θd    (dead zone)
//!
//! f_p(v) = exp(−αp·(v + θp)) − 1
//! f_d(v) = exp( αd·(v − θd)) − 1
//! ```
//!
//! Potentiation sits on the negative side in this signed-normalized
//! convention; which physical polarity SETs a device is folded into it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{clamp, Scalar};
use crate::seed;

/// Fitted switching model of one memristor technology.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceParams<T> {
    pub alpha_p: T,
    pub alpha_d: T,
    /// Potentiation threshold magnitude (V).
    pub theta_p: T,
    /// Depression threshold magnitude (V).
    pub theta_d: T,
    pub gamma_p: T,
    pub gamma_d: T,
    pub hrs_ohm: T,
    pub lrs_ohm: T,
    /// Depression/potentiation scaling asymmetry.
    pub sf_pd: T,
}

/// Named device presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Preset {
    #[serde(rename = "tio2")]
    TiO2,
    #[serde(rename = "hzo")]
    Hzo,
    #[serde(rename = "cmo-hfo2")]
    CmoHfO2,
}

impl Preset {
    pub const ALL: [Preset; 3] = [Preset::TiO2, Preset::Hzo, Preset::CmoHfO2];

    pub fn name(self) -> &'static str {
        match self {
            Preset::TiO2 => "tio2",
            Preset::Hzo => "hzo",
            Preset::CmoHfO2 => "cmo-hfo2",
        }
    }

    /// Potentiation scaling used for learning on MNIST, picked by grid search
    /// at 50 neurons.
    pub fn default_sf_p(self) -> f64 {
        match self {
            Preset::TiO2 | Preset::Hzo => 1.05,
            Preset::CmoHfO2 => 1.1,
        }
    }

    /// Synapse-to-output current gain, from the same search.
    pub fn default_synapse_gain(self) -> f64 {
        match self {
            Preset::TiO2 => 4.0,
            Preset::Hzo | Preset::CmoHfO2 => 5.0,
        }
    }

    /// Reference RMSE of the published fit on measured data.
    pub fn reference_rmse(self) -> f64 {
        match self {
            Preset::TiO2 => 0.047,
            Preset::Hzo => 0.041,
            Preset::CmoHfO2 => 0.0141,
        }
    }

    pub fn params<T: Scalar>(self) -> DeviceParams<T> {
        let p =
            |alpha_p, alpha_d, theta_p, theta_d, gamma_p, gamma_d, hrs, lrs, sf_pd| DeviceParams {
                alpha_p: T::of(alpha_p),
                alpha_d: T::of(alpha_d),
                theta_p: T::of(theta_p),
                theta_d: T::of(theta_d),
                gamma_p: T::of(gamma_p),
                gamma_d: T::of(gamma_d),
                hrs_ohm: T::of(hrs),
                lrs_ohm: T::of(lrs),
                sf_pd: T::of(sf_pd),
            };
        match self {
            Preset::TiO2 => p(0.678, 0.762, 1.432, 1.563, 1.68, 1.583, 15e3, 2e3, 1.057),
            Preset::Hzo => p(1.159, 0.549, 0.411, 0.387, 1.067, 1.684, 45e6, 17e6, 1.2),
            Preset::CmoHfO2 => p(0.96, 1.27, 0.8, 0.85, 1.017, 0.5, 4e3, 1e3, 1.0),
        }
    }
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tio2" => Ok(Preset::TiO2),
            "hzo" => Ok(Preset::Hzo),
            "cmo-hfo2" | "cmo_hfo2" | "cmohfo2" | "cmo" => Ok(Preset::CmoHfO2),
            other => Err(Error::Input(format!(
                "unknown device preset `{other}` (expected tio2, hzo or cmo-hfo2)"
            ))),
        }
    }
}

impl std::fmt::Display for Preset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl<T: Scalar> DeviceParams<T> {
    /// Key order of the config block.
    pub const KEYS: [&'static str; 9] = [
        "alpha_p", "alpha_d", "theta_p", "theta_d", "gamma_p", "gamma_d", "hrs_ohm", "lrs_ohm",
        "sf_pd",
    ];

    pub fn validate(&self) -> Result<()> {
        for (key, value) in Self::KEYS.iter().zip(self.values()) {
            if !(value.is_finite() && value > T::zero()) {
                return Err(Error::validation(
                    *key,
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if self.hrs_ohm < self.lrs_ohm {
            return Err(Error::validation(
                "hrs_ohm",
                format!(
                    "HRS ({}) must not be below LRS ({})",
                    self.hrs_ohm, self.lrs_ohm
                ),
            ));
        }
        Ok(())
    }

    pub fn values(&self) -> [T; 9] {
        [
            self.alpha_p,
            self.alpha_d,
            self.theta_p,
            self.theta_d,
            self.gamma_p,
            self.gamma_d,
            self.hrs_ohm,
            self.lrs_ohm,
            self.sf_pd,
        ]
    }

    pub fn set(&mut self, key: &str, value: T) -> Result<()> {
        let slot = match key {
            "alpha_p" => &mut self.alpha_p,
            "alpha_d" => &mut self.alpha_d,
            "theta_p" => &mut self.theta_p,
            "theta_d" => &mut self.theta_d,
            "gamma_p" => &mut self.gamma_p,
            "gamma_d" => &mut self.gamma_d,
            "hrs_ohm" => &mut self.hrs_ohm,
            "lrs_ohm" => &mut self.lrs_ohm,
            "sf_pd" => &mut self.sf_pd,
            other => return Err(Error::Config(format!("unknown device key `{other}`"))),
        };
        *slot = value;
        Ok(())
    }

    /// HRS conductance (S).
    pub fn g_min(&self) -> T {
        self.hrs_ohm.recip()
    }

    /// LRS conductance (S).
    pub fn g_max(&self) -> T {
        self.lrs_ohm.recip()
    }

    pub fn bounds(&self) -> ConductanceBounds<T> {
        ConductanceBounds {
            g_min: self.g_min(),
            g_max: self.g_max(),
        }
    }

    /// Render the params as `key = value` lines.
    pub fn to_config_block(&self) -> String {
        let mut out = String::new();
        for (key, value) in Self::KEYS.iter().zip(self.values()) {
            out.push_str(&format!("{key} = {}\n", value.to_f64_lossy()));
        }
        out
    }
}

/// Parameters the switching equations read; implemented by the nominal
/// [`DeviceParams`] and by per-synapse [`DeviceInstance`]s.
pub trait Switching<T: Scalar> {
    fn alpha_p(&self) -> T;
    fn alpha_d(&self) -> T;
    fn theta_p(&self) -> T;
    fn theta_d(&self) -> T;
    fn gamma_p(&self) -> T;
    fn gamma_d(&self) -> T;
}

impl<T: Scalar> Switching<T> for DeviceParams<T> {
    fn alpha_p(&self) -> T {
        self.alpha_p
    }
    fn alpha_d(&self) -> T {
        self.alpha_d
    }
    fn theta_p(&self) -> T {
        self.theta_p
    }
    fn theta_d(&self) -> T {
        self.theta_d
    }
    fn gamma_p(&self) -> T {
        self.gamma_p
    }
    fn gamma_d(&self) -> T {
        self.gamma_d
    }
}

/// Normalized conductance in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
pub struct WeightState<T>(T);

impl<T: Scalar> WeightState<T> {
    pub fn new(w: T) -> Result<Self> {
        if w >= T::zero() && w <= T::one() {
            Ok(WeightState(w))
        } else {
            Err(Error::validation("w", format!("weight {w} outside [0, 1]")))
        }
    }

    /// Clamp into `[0, 1]`. NaN maps to 0.
    pub fn clamped(w: T) -> Self {
        if w.is_nan() {
            WeightState(T::zero())
        } else {
            WeightState(clamp(w, T::zero(), T::one()))
        }
    }

    #[inline]
    pub fn get(self) -> T {
        self.0
    }
}

/// Which branch of the rate function a voltage falls on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Branch {
    Pot,
    Dep,
    None,
}

/// Rate magnitude and branch for a pulse of `v` volts. Non-finite `v` is rejected.
pub fn switching_rate<T: Scalar>(v: T, dev: &impl Switching<T>) -> Result<(T, Branch)> {
    if !v.is_finite() {
        return Err(Error::Input(format!(
            "pulse voltage must be finite, got {v}"
        )));
    }
    Ok(rate(v, dev))
}

#[inline]
pub(crate) fn rate<T: Scalar>(v: T, dev: &impl Switching<T>) -> (T, Branch) {
    let theta_p = dev.theta_p();
    let theta_d = dev.theta_d();
    if v <= -theta_p {
        (
            (-dev.alpha_p() * (v + theta_p)).exp() - T::one(),
            Branch::Pot,
        )
    } else if v >= theta_d {
        (
            (dev.alpha_d() * (v - theta_d)).exp() - T::one(),
            Branch::Dep,
        )
    } else {
        (T::zero(), Branch::None)
    }
}

/// State-dependent window: `(1−w)^γp` for potentiation, `w^γd` for depression.
#[inline]
pub fn window<T: Scalar>(w: WeightState<T>, branch: Branch, dev: &impl Switching<T>) -> T {
    match branch {
        Branch::Pot => (T::one() - w.0).powf(dev.gamma_p()),
        Branch::Dep => w.0.powf(dev.gamma_d()),
        Branch::None => T::zero(),
    }
}

/// Signed weight change for one pulse; positive on the potentiation branch.
#[inline]
pub fn delta_w<T: Scalar>(v: T, w: WeightState<T>, dev: &impl Switching<T>) -> T {
    let (f, branch) = rate(v, dev);
    match branch {
        Branch::Pot => f * window(w, branch, dev),
        Branch::Dep => -(f * window(w, branch, dev)),
        Branch::None => T::zero(),
    }
}

#[inline]
pub fn apply_pulse<T: Scalar>(w: WeightState<T>, v: T, dev: &impl Switching<T>) -> WeightState<T> {
    WeightState::clamped(w.0 + delta_w(v, w, dev))
}

/// Weight trace under a pulse sequence, starting with `w0`.
pub fn pulse_train_trace<T: Scalar>(
    dev: &impl Switching<T>,
    voltages: &[T],
    w0: WeightState<T>,
) -> Vec<WeightState<T>> {
    let mut trace = Vec::with_capacity(voltages.len() + 1);
    trace.push(w0);
    let mut w = w0;
    for &v in voltages {
        w = apply_pulse(w, v, dev);
        trace.push(w);
    }
    trace
}

/// HRS/LRS conductance pair (S).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConductanceBounds<T> {
    pub g_min: T,
    pub g_max: T,
}

impl<T: Scalar> ConductanceBounds<T> {
    pub fn new(g_min: T, g_max: T) -> Result<Self> {
        if !(g_min > T::zero() && g_max > g_min) {
            return Err(Error::Input(format!(
                "conductance bounds need g_max > g_min > 0, got g_min={g_min}, g_max={g_max}"
            )));
        }
        Ok(ConductanceBounds { g_min, g_max })
    }
}

pub fn weight_from_conductance<T: Scalar>(g: T, g_min: T, g_max: T) -> Result<WeightState<T>> {
    let b = ConductanceBounds::new(g_min, g_max)?;
    Ok(WeightState::clamped((g - b.g_min) / (b.g_max - b.g_min)))
}

pub fn conductance_from_weight<T: Scalar>(w: WeightState<T>, g_min: T, g_max: T) -> Result<T> {
    let b = ConductanceBounds::new(g_min, g_max)?;
    Ok(b.g_min + w.0 * (b.g_max - b.g_min))
}

/// Sampled parameters of one physical synapse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DeviceInstance<T> {
    pub theta_p: T,
    pub theta_d: T,
    pub g_min: T,
    pub g_max: T,
    pub alpha_p: T,
    pub alpha_d: T,
    pub gamma_p: T,
    pub gamma_d: T,
}

impl<T: Scalar> DeviceInstance<T> {
    pub fn nominal(params: &DeviceParams<T>) -> Self {
        DeviceInstance {
            theta_p: params.theta_p,
            theta_d: params.theta_d,
            g_min: params.g_min(),
            g_max: params.g_max(),
            alpha_p: params.alpha_p,
            alpha_d: params.alpha_d,
            gamma_p: params.gamma_p,
            gamma_d: params.gamma_d,
        }
    }
}

impl<T: Scalar> Switching<T> for DeviceInstance<T> {
    fn alpha_p(&self) -> T {
        self.alpha_p
    }
    fn alpha_d(&self) -> T {
        self.alpha_d
    }
    fn theta_p(&self) -> T {
        self.theta_p
    }
    fn theta_d(&self) -> T {
        self.theta_d
    }
    fn gamma_p(&self) -> T {
        self.gamma_p
    }
    fn gamma_d(&self) -> T {
        self.gamma_d
    }
}

/// Weight seen by the forward pass when a device's bounds differ from the
/// reference bounds; the fractional state shifts proportionally. Not clamped.
#[inline]
pub fn effective_weight<T: Scalar>(
    w: WeightState<T>,
    inst: &DeviceInstance<T>,
    reference: ConductanceBounds<T>,
) -> T {
    (inst.g_min + w.0 * (inst.g_max - inst.g_min) - reference.g_min)
        / (reference.g_max - reference.g_min)
}

/// Device-to-device dispersion (σ/μ) of the varied parameters.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VariabilitySpec {
    pub rsd_theta: f64,
    pub rsd_hrs: f64,
    pub rsd_lrs: f64,
}

impl VariabilitySpec {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("rsd_theta", self.rsd_theta),
            ("rsd_hrs", self.rsd_hrs),
            ("rsd_lrs", self.rsd_lrs),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::validation(
                    field,
                    format!("must lie in [0, 1], got {v}"),
                ));
            }
        }
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.rsd_theta == 0.0 && self.rsd_hrs == 0.0 && self.rsd_lrs == 0.0
    }
}

/// Positive draw from N(mean, (rsd·mean)²); non-positive draws are redrawn.
fn positive_normal(rng: &mut impl Rng, mean: f64, rsd: f64) -> f64 {
    loop {
        let z: f64 = rng.sample(StandardNormal);
        let x = mean + rsd * mean * z;
        if x > 0.0 {
            return x;
        }
    }
}

/// Draw `n` device instances around `params`.
///
/// Per instance the draw order is θp, θd, then the (HRS, LRS) pair; a pair
/// with LRS ≥ HRS is redrawn so every instance keeps `g_max > g_min`.
pub fn sample_instances<T: Scalar>(
    params: &DeviceParams<T>,
    spec: &VariabilitySpec,
    n: usize,
    seed: u64,
) -> Result<Vec<DeviceInstance<T>>> {
    params.validate()?;
    spec.validate()?;
    if n == 0 {
        return Err(Error::Input("sample_instances needs n >= 1".into()));
    }
    let nominal = DeviceInstance::nominal(params);
    if spec.is_zero() {
        return Ok(vec![nominal; n]);
    }
    let mut rng = seed::rng(seed);
    let theta_p = params.theta_p.to_f64_lossy();
    let theta_d = params.theta_d.to_f64_lossy();
    let hrs = params.hrs_ohm.to_f64_lossy();
    let lrs = params.lrs_ohm.to_f64_lossy();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let tp = positive_normal(&mut rng, theta_p, spec.rsd_theta);
        let td = positive_normal(&mut rng, theta_d, spec.rsd_theta);
        let (hrs_i, lrs_i) = loop {
            let h = positive_normal(&mut rng, hrs, spec.rsd_hrs);
            let l = positive_normal(&mut rng, lrs, spec.rsd_lrs);
            if h > l {
                break (h, l);
            }
        };
        out.push(DeviceInstance {
            theta_p: T::of(tp),
            theta_d: T::of(td),
            g_min: T::of(1.0 / hrs_i),
            g_max: T::of(1.0 / lrs_i),
            ..nominal
        });
    }
    Ok(out)
}

/// Share of devices whose threshold cannot be crossed by the largest
/// available programming voltage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StuckFraction {
    pub pot: f64,
    pub dep: f64,
    /// Stuck on at least one polarity.
    pub either: f64,
}

pub fn stuck_fraction<T: Scalar>(
    instances: &[DeviceInstance<T>],
    v_max_pot: T,
    v_max_dep: T,
) -> StuckFraction {
    if instances.is_empty() {
        return StuckFraction {
            pot: 0.0,
            dep: 0.0,
            either: 0.0,
        };
    }
    let (mut pot, mut dep, mut either) = (0usize, 0usize, 0usize);
    for inst in instances {
        let p = inst.theta_p > v_max_pot;
        let d = inst.theta_d > v_max_dep;
        pot += p as usize;
        dep += d as usize;
        either += (p || d) as usize;
    }
    let n = instances.len() as f64;
    StuckFraction {
        pot: pot as f64 / n,
        dep: dep as f64 / n,
        either: either as f64 / n,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tio2() -> DeviceParams<f64> {
        Preset::TiO2.params()
    }

    fn w(x: f64) -> WeightState<f64> {
        WeightState::new(x).unwrap()
    }

    #[test]
    fn rate_at_potentiation_threshold_is_zero() {
        let (f, b) = switching_rate(-1.432, &tio2()).unwrap();
        assert_eq!(f, 0.0);
        assert_eq!(b, Branch::Pot);
    }

    #[test]
    fn rate_in_dead_zone() {
        assert_eq!(switching_rate(1.0, &tio2()).unwrap(), (0.0, Branch::None));
    }

    #[test]
    fn rate_on_depression_branch() {
        let (f, b) = switching_rate(2.0, &tio2()).unwrap();
        assert_eq!(b, Branch::Dep);
        assert!((f - 0.395_138_927_611_125_46).abs() < 1e-12);
    }

    #[test]
    fn rate_rejects_nan() {
        assert!(switching_rate(f64::NAN, &tio2()).is_err());
        assert!(switching_rate(f64::INFINITY, &tio2()).is_err());
    }

    #[test]
    fn window_edges() {
        let p = tio2();
        assert_eq!(window(w(1.0), Branch::Pot, &p), 0.0);
        assert_eq!(window(w(0.0), Branch::Dep, &p), 0.0);
        assert!((window(w(0.5), Branch::Dep, &p) - 0.333_787_075_823_977_04).abs() < 1e-12);
    }

    #[test]
    fn delta_w_examples() {
        let p = tio2();
        assert!((delta_w(2.0, w(0.5), &p) + 0.131_892_267_191_539_7).abs() < 1e-12);
        assert!((delta_w(-2.0, w(0.2), &p) - 0.322_904_308_636_751_6).abs() < 1e-12);
        for preset in Preset::ALL {
            assert_eq!(delta_w(0.0, w(0.5), &preset.params::<f64>()), 0.0);
        }
    }

    #[test]
    fn apply_pulse_examples() {
        let p = tio2();
        assert_eq!(apply_pulse(w(0.99), -10.0, &p).get(), 1.0);
        // The window keeps a moderate pulse from reaching the bound.
        let near = apply_pulse(w(0.99), -3.0, &p).get();
        assert!(near > 0.99 && near < 1.0, "{near}");
        assert_eq!(apply_pulse(w(0.5), 1.0, &p).get(), 0.5);
        assert!((apply_pulse(w(0.5), 2.0, &p).get() - 0.368_107_732_808_460_3).abs() < 1e-12);
    }

    #[test]
    fn trace_ltp_then_ltd() {
        let p = tio2();
        let sf = 1.05;
        let mut volts = vec![-sf * p.theta_p; 50];
        volts.extend(vec![sf * p.theta_d; 50]);
        let trace = pulse_train_trace(&p, &volts, w(0.0));
        assert_eq!(trace.len(), 101);
        assert!(trace[..51].windows(2).all(|s| s[1] >= s[0]));
        assert!(trace[50..].windows(2).all(|s| s[1] <= s[0]));
        assert!(trace[50].get() > 0.0);
    }

    #[test]
    fn trace_in_dead_zone_is_constant() {
        for preset in Preset::ALL {
            let trace = pulse_train_trace(&preset.params::<f64>(), &[0.0; 50], w(0.5));
            assert!(trace.iter().all(|s| s.get() == 0.5));
        }
    }

    #[test]
    fn repeated_pulses_shrink_steps() {
        let p = tio2();
        let trace = pulse_train_trace(&p, &[-2.0; 10], w(0.0));
        let steps: Vec<f64> = trace
            .windows(2)
            .map(|s| (s[1].get() - s[0].get()).abs())
            .collect();
        assert!(steps.windows(2).all(|s| s[1] < s[0]), "{steps:?}");
    }

    #[test]
    fn conductance_conversion() {
        let (gmin, gmax) = (1.0 / 15000.0, 1.0 / 2000.0);
        assert_eq!(
            weight_from_conductance(gmin, gmin, gmax).unwrap().get(),
            0.0
        );
        assert_eq!(
            weight_from_conductance(gmax, gmin, gmax).unwrap().get(),
            1.0
        );
        assert_eq!(
            weight_from_conductance(0.5 * gmin, gmin, gmax)
                .unwrap()
                .get(),
            0.0
        );
        assert!(weight_from_conductance(1.0, 2.0, 2.0).is_err());
        assert!(conductance_from_weight(w(0.3), 2.0, 1.0).is_err());
        let g = conductance_from_weight(w(0.3), gmin, gmax).unwrap();
        assert!((weight_from_conductance(g, gmin, gmax).unwrap().get() - 0.3).abs() < 1e-12);
    }

    #[test]
    fn effective_weight_examples() {
        let p = tio2();
        let reference = p.bounds();
        let nominal = DeviceInstance::nominal(&p);
        for x in [0.0, 0.25, 0.7, 1.0] {
            assert!((effective_weight(w(x), &nominal, reference) - x).abs() < 1e-12);
        }
        let shifted = DeviceInstance {
            g_min: 2.0 * reference.g_min,
            ..nominal
        };
        let expected = reference.g_min / (reference.g_max - reference.g_min);
        assert!((effective_weight(w(0.0), &shifted, reference) - expected).abs() < 1e-15);
        let lower_max = DeviceInstance {
            g_max: 0.9 * reference.g_max,
            ..nominal
        };
        let got = effective_weight(w(1.0), &lower_max, reference);
        assert!((got - 0.884_615_384_615_384_8).abs() < 1e-12);
    }

    #[test]
    fn zero_variability_gives_nominal() {
        let p = tio2();
        let inst = sample_instances(&p, &VariabilitySpec::none(), 100, 3).unwrap();
        assert!(inst.iter().all(|i| *i == DeviceInstance::nominal(&p)));
    }

    #[test]
    fn threshold_statistics() {
        let p = tio2();
        let spec = VariabilitySpec {
            rsd_theta: 0.2,
            ..Default::default()
        };
        let inst = sample_instances(&p, &spec, 100_000, 11).unwrap();
        let n = inst.len() as f64;
        let mean = inst.iter().map(|i| i.theta_p).sum::<f64>() / n;
        let var = inst.iter().map(|i| (i.theta_p - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean / p.theta_p - 1.0).abs() < 0.01);
        assert!((var.sqrt() / mean / 0.2 - 1.0).abs() < 0.05);
    }

    #[test]
    fn sampling_is_reproducible() {
        let p: DeviceParams<f64> = Preset::Hzo.params();
        let spec = VariabilitySpec {
            rsd_theta: 0.3,
            rsd_hrs: 0.4,
            rsd_lrs: 0.4,
        };
        let a = sample_instances(&p, &spec, 500, 5).unwrap();
        let b = sample_instances(&p, &spec, 500, 5).unwrap();
        assert_eq!(a, b);
        assert!(a
            .iter()
            .all(|i| i.g_max > i.g_min && i.g_min > 0.0 && i.theta_p > 0.0));
    }

    #[test]
    fn stuck_fraction_examples() {
        let p = tio2();
        let nominal = sample_instances(&p, &VariabilitySpec::none(), 10, 0).unwrap();
        let s = stuck_fraction(&nominal, 1.05 * p.theta_p, 1.05 * p.theta_d);
        assert_eq!((s.pot, s.dep, s.either), (0.0, 0.0, 0.0));
        let s = stuck_fraction(&nominal, 0.0, 0.0);
        assert_eq!((s.pot, s.dep), (1.0, 1.0));

        let spec = VariabilitySpec {
            rsd_theta: 0.2,
            ..Default::default()
        };
        let inst = sample_instances(&p, &spec, 200_000, 9).unwrap();
        let s = stuck_fraction(&inst, 1.2 * p.theta_p, 1.2 * p.theta_d);
        // Standard-normal tail P(Z > 1).
        assert!((s.pot - 0.158_655).abs() < 0.005, "{}", s.pot);
        assert!((s.dep - 0.158_655).abs() < 0.005, "{}", s.dep);
    }

    #[test]
    fn preset_validation() {
        for preset in Preset::ALL {
            preset.params::<f64>().validate().unwrap();
        }
        let mut bad = tio2();
        bad.gamma_p = 0.0;
        assert!(
            matches!(bad.validate(), Err(Error::Validation { field, .. }) if field == "gamma_p")
        );
        let mut swapped = tio2();
        swapped.lrs_ohm = 20e3;
        assert!(swapped.validate().is_err());
    }
}
