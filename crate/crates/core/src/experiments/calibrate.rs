use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use super::RunSpec;
use crate::error::{Error, Result};
use crate::neuron::{LifKernel, LifState};
use crate::scalar::Scalar;
use crate::seed;
use crate::snn::VoltageMap;

/// Input-layer behaviour at one `(bias_b, sigma_noise)` point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EncodingPoint {
    pub bias_b: f64,
    pub sigma_noise: f64,
    /// Mean spikes per sample of a saturated (255) pixel.
    pub saturated_spikes: f64,
    /// Mean spikes per sample of a blank pixel.
    pub background_spikes: f64,
    /// Fraction of steps in which a blank pixel's synapse would be depressed
    /// by an output spike.
    pub background_ltd_rate: f64,
    /// Same for potentiation of a saturated pixel's synapse.
    pub saturated_ltp_rate: f64,
}

/// Simulate isolated saturated and blank input neurons over a bias × noise
/// grid, `trials` samples each, under the network and VDSP settings of `spec`.
pub fn calibrate_encoding<T: Scalar>(
    spec: &RunSpec<T>,
    biases: &[f64],
    sigmas: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<EncodingPoint>> {
    if biases.is_empty() || sigmas.is_empty() || trials == 0 {
        return Err(Error::Input(
            "calibration needs nonempty grids and trials >= 1".into(),
        ));
    }
    let steps = spec
        .network
        .steps_for(T::of(spec.presentation.duration))
        .max(1);
    let mut out = Vec::with_capacity(biases.len() * sigmas.len());
    for &bias in biases {
        for &sigma in sigmas {
            let mut s = spec.clone();
            s.presentation.encoding.bias_b = bias;
            s.presentation.encoding.sigma_noise = sigma;
            s.presentation.encoding.validate()?;
            let net = s.resolved_network();
            net.validate()?;
            let kernel = LifKernel::new(net.input, net.dt)?;
            let map = VoltageMap::new(&net.vdsp, net.input.v_th, &net.device)?;
            let mut start = LifState::at_rest(&net.input);
            start.v = net.input_start.potential(&net.input);
            let theta_p = net.device.theta_p;
            let theta_d = net.device.theta_d;
            let i_max = T::of(s.presentation.encoding.i_max);
            let sigma_t = T::of(sigma);

            let (mut sat_spikes, mut bg_spikes, mut bg_ltd, mut sat_ltp) = (0u64, 0u64, 0u64, 0u64);
            for trial in 0..trials as u64 {
                let mut rng = seed::rng(seed::child(seed, seed::stream::ENCODING, trial));
                let (mut sat, mut bg) = (start, start);
                for _ in 0..steps {
                    let z_sat: f64 = rng.sample(StandardNormal);
                    let z_bg: f64 = rng.sample(StandardNormal);
                    sat_spikes += kernel.step(&mut sat, i_max + sigma_t * T::of(z_sat)) as u64;
                    bg_spikes += kernel.step(&mut bg, sigma_t * T::of(z_bg)) as u64;
                    bg_ltd += (map.voltage(bg.v) >= theta_d) as u64;
                    sat_ltp += (map.voltage(sat.v) <= -theta_p) as u64;
                }
            }
            let total_steps = (trials * steps) as f64;
            out.push(EncodingPoint {
                bias_b: bias,
                sigma_noise: sigma,
                saturated_spikes: sat_spikes as f64 / trials as f64,
                background_spikes: bg_spikes as f64 / trials as f64,
                background_ltd_rate: bg_ltd as f64 / total_steps,
                saturated_ltp_rate: sat_ltp as f64 / total_steps,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::Preset;
    use crate::snn::NetworkConfig;

    #[test]
    fn bias_moves_background_into_depression() {
        let spec = RunSpec::<f64>::new(NetworkConfig::mnist(Preset::TiO2, 10));
        let pts = calibrate_encoding(&spec, &[0.3, 0.95], &[0.0], 20, 1).unwrap();
        assert_eq!(pts[0].background_ltd_rate, 0.0);
        assert!(pts[1].background_ltd_rate > 0.5, "{:?}", pts[1]);
        assert_eq!(pts[0].background_spikes, 0.0);
        // A saturated pixel fires a few times per 40 ms window.
        assert!(
            (2.0..=4.0).contains(&pts[0].saturated_spikes),
            "{:?}",
            pts[0]
        );
        assert!(pts[0].saturated_ltp_rate > 0.0);
    }

    #[test]
    fn rejects_empty_grid() {
        let spec = RunSpec::<f64>::new(NetworkConfig::mnist(Preset::TiO2, 10));
        assert!(calibrate_encoding(&spec, &[], &[0.3], 5, 0).is_err());
    }
}
