//! Membrane-potential to programming-voltage mapping.
//!
//! The presynaptic membrane, normalized to `x ∈ [−1, 1]` around `v_mid`, is
//! scaled onto the device's programming window. A neuron that just fired
//! (hyperpolarized, `x < 0`) yields a negative voltage and potentiates; one
//! close to firing (`x > 0`) yields a positive voltage and depresses. A
//! device only switches once `|x|·sf` exceeds one, so the scaling factors
//! set how much of the membrane range produces updates.

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::error::{Error, Result};
use crate::scalar::{clamp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VdspConfig<T> {
    /// Potentiation scaling factor.
    pub sf_p: T,
    /// Depression/potentiation ratio; `sf_d = sf_p · sf_pd`.
    pub sf_pd: T,
    /// Membrane value that maps to 0 V.
    pub v_mid: T,
}

impl<T: Scalar> VdspConfig<T> {
    pub fn new(sf_p: T, sf_pd: T) -> Self {
        VdspConfig {
            sf_p,
            sf_pd,
            v_mid: T::zero(),
        }
    }

    /// Baseline scaling with the device's own asymmetry.
    pub fn for_device(params: &DeviceParams<T>) -> Self {
        Self::new(T::of(1.05), params.sf_pd)
    }

    pub fn sf_d(&self) -> T {
        self.sf_p * self.sf_pd
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sf_p > T::zero() && self.sf_p.is_finite()) {
            return Err(Error::validation("sf_p", "must be > 0"));
        }
        if !(self.sf_pd > T::zero() && self.sf_pd.is_finite()) {
            return Err(Error::validation("sf_pd", "must be > 0"));
        }
        if !self.v_mid.is_finite() {
            return Err(Error::validation("v_mid", "must be finite"));
        }
        Ok(())
    }
}

/// Precomputed mapping for one network.
#[derive(Debug, Clone, Copy)]
pub struct VoltageMap<T> {
    v_mid: T,
    inv_span: T,
    pot_scale: T,
    dep_scale: T,
}

impl<T: Scalar> VoltageMap<T> {
    /// `v_th` is the presynaptic firing threshold (the `x = +1` point).
    pub fn new(cfg: &VdspConfig<T>, v_th: T, params: &DeviceParams<T>) -> Result<Self> {
        cfg.validate()?;
        if !(v_th > cfg.v_mid) {
            return Err(Error::Config(format!(
                "v_mid ({}) must lie below the presynaptic threshold ({v_th})",
                cfg.v_mid
            )));
        }
        Ok(VoltageMap {
            v_mid: cfg.v_mid,
            inv_span: (v_th - cfg.v_mid).recip(),
            pot_scale: cfg.sf_p * params.theta_p,
            dep_scale: cfg.sf_d() * params.theta_d,
        })
    }

    #[inline(always)]
    pub fn voltage(&self, v_mem: T) -> T {
        let x = clamp((v_mem - self.v_mid) * self.inv_span, -T::one(), T::one());
        if x > T::zero() {
            x * self.dep_scale
        } else if x < T::zero() {
            x * self.pot_scale
        } else {
            T::zero()
        }
    }

    /// Largest potentiating voltage magnitude.
    pub fn max_pot(&self) -> T {
        self.pot_scale
    }

    pub fn max_dep(&self) -> T {
        self.dep_scale
    }
}

/// Programming voltage for a presynaptic membrane value `v_mem`.
pub fn prog_voltage<T: Scalar>(
    v_mem: T,
    cfg: &VdspConfig<T>,
    v_th: T,
    params: &DeviceParams<T>,
) -> Result<T> {
    Ok(VoltageMap::new(cfg, v_th, params)?.voltage(v_mem))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{delta_w, Preset, WeightState};

    #[test]
    fn examples() {
        let p: DeviceParams<f64> = Preset::TiO2.params();
        let cfg = VdspConfig::new(1.05, 1.057);
        assert_eq!(prog_voltage(0.0, &cfg, 1.0, &p).unwrap(), 0.0);
        assert!((prog_voltage(-1.0, &cfg, 1.0, &p).unwrap() + 1.5036).abs() < 1e-12);
        let v = prog_voltage(1.0, &cfg, 1.0, &p).unwrap();
        assert!((v - 1.734_695_55).abs() < 1e-9, "{v}");
        // Clamped outside the normalized range.
        assert_eq!(
            prog_voltage(-3.0, &cfg, 1.0, &p).unwrap(),
            prog_voltage(-1.0, &cfg, 1.0, &p).unwrap()
        );
    }

    #[test]
    fn unit_scaling_keeps_interior_in_dead_zone() {
        let p: DeviceParams<f64> = Preset::CmoHfO2.params();
        let cfg = VdspConfig::new(1.0, 1.0);
        let w = WeightState::new(0.5).unwrap();
        for i in 1..200 {
            let v_mem = -1.0 + i as f64 / 100.0;
            let v = prog_voltage(v_mem, &cfg, 1.0, &p).unwrap();
            assert_eq!(delta_w(v, w, &p), 0.0, "v_mem={v_mem}");
        }
    }

    #[test]
    fn active_window_grows_with_scaling() {
        let p: DeviceParams<f64> = Preset::TiO2.params();
        let w = WeightState::new(0.5).unwrap();
        let active = |sf: f64| {
            let cfg = VdspConfig::new(sf, 1.0);
            (0..=2000)
                .filter(|i| {
                    let v_mem = -1.0 + *i as f64 / 1000.0;
                    delta_w(prog_voltage(v_mem, &cfg, 1.0, &p).unwrap(), w, &p) != 0.0
                })
                .count()
        };
        let counts: Vec<usize> = [1.0, 1.05, 1.2, 1.5, 2.0]
            .iter()
            .map(|&sf| active(sf))
            .collect();
        assert!(counts.windows(2).all(|c| c[1] > c[0]), "{counts:?}");
        // |x| ≥ 1/sf on each side: 2 · (1 − 1/2) · 1000 + 2 endpoints,
        // give or take the two grid points sitting exactly on a threshold.
        assert!((1000..=1002).contains(&counts[4]), "{}", counts[4]);
    }
}
