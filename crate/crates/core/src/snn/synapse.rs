use serde::Serialize;

use crate::device::{
    self, ConductanceBounds, DeviceInstance, DeviceParams, StuckFraction, Switching, WeightState,
};
use crate::scalar::Scalar;

/// Outcome counts of one plasticity event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct UpdateCounts {
    pub ltp: u64,
    pub ltd: u64,
    pub none: u64,
}

impl std::ops::AddAssign for UpdateCounts {
    fn add_assign(&mut self, o: Self) {
        self.ltp += o.ltp;
        self.ltd += o.ltd;
        self.none += o.none;
    }
}

/// Fully connected memristive layer, `n_pre × n_post`, stored row-major by
/// presynaptic index. Per-synapse device data is kept column-wise (one
/// vector per field) so the forward pass and the update loop stay linear.
#[derive(Debug, Clone, PartialEq)]
pub struct SynapseMatrix<T> {
    n_pre: usize,
    n_post: usize,
    weights: Vec<T>,
    theta_p: Vec<T>,
    theta_d: Vec<T>,
    g_min: Vec<T>,
    g_max: Vec<T>,
    /// `effective = eff_offset + w · eff_scale`.
    eff_offset: Vec<T>,
    eff_scale: Vec<T>,
    params: DeviceParams<T>,
    reference: ConductanceBounds<T>,
}

impl<T: Scalar> SynapseMatrix<T> {
    /// `weights` and `instances` are row-major `n_pre × n_post`.
    pub fn new(
        n_pre: usize,
        n_post: usize,
        weights: Vec<WeightState<T>>,
        instances: &[DeviceInstance<T>],
        params: DeviceParams<T>,
    ) -> Self {
        let n = n_pre * n_post;
        assert_eq!(weights.len(), n, "weight count");
        assert_eq!(instances.len(), n, "instance count");
        let reference = params.bounds();
        let span = reference.g_max - reference.g_min;
        SynapseMatrix {
            n_pre,
            n_post,
            weights: weights.into_iter().map(WeightState::get).collect(),
            theta_p: instances.iter().map(|i| i.theta_p).collect(),
            theta_d: instances.iter().map(|i| i.theta_d).collect(),
            g_min: instances.iter().map(|i| i.g_min).collect(),
            g_max: instances.iter().map(|i| i.g_max).collect(),
            eff_offset: instances
                .iter()
                .map(|i| (i.g_min - reference.g_min) / span)
                .collect(),
            eff_scale: instances
                .iter()
                .map(|i| (i.g_max - i.g_min) / span)
                .collect(),
            params,
            reference,
        }
    }

    pub fn n_pre(&self) -> usize {
        self.n_pre
    }

    pub fn n_post(&self) -> usize {
        self.n_post
    }

    pub fn params(&self) -> &DeviceParams<T> {
        &self.params
    }

    pub fn reference(&self) -> ConductanceBounds<T> {
        self.reference
    }

    #[inline]
    fn idx(&self, pre: usize, post: usize) -> usize {
        pre * self.n_post + post
    }

    pub fn weight(&self, pre: usize, post: usize) -> WeightState<T> {
        WeightState::clamped(self.weights[self.idx(pre, post)])
    }

    /// Raw row-major weights.
    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn set_weights(&mut self, weights: &[T]) {
        assert_eq!(weights.len(), self.weights.len());
        for (dst, &src) in self.weights.iter_mut().zip(weights) {
            *dst = WeightState::clamped(src).get();
        }
    }

    pub fn instance(&self, pre: usize, post: usize) -> DeviceInstance<T> {
        let i = self.idx(pre, post);
        DeviceInstance {
            theta_p: self.theta_p[i],
            theta_d: self.theta_d[i],
            g_min: self.g_min[i],
            g_max: self.g_max[i],
            ..DeviceInstance::nominal(&self.params)
        }
    }

    pub fn instances(&self) -> Vec<DeviceInstance<T>> {
        (0..self.n_pre)
            .flat_map(|j| (0..self.n_post).map(move |k| (j, k)))
            .map(|(j, k)| self.instance(j, k))
            .collect()
    }

    pub fn effective_weight(&self, pre: usize, post: usize) -> T {
        let i = self.idx(pre, post);
        self.eff_offset[i] + self.weights[i] * self.eff_scale[i]
    }

    /// Column `post` as a vector over presynaptic neurons.
    pub fn column(&self, post: usize) -> Vec<T> {
        (0..self.n_pre)
            .map(|j| self.weights[self.idx(j, post)])
            .collect()
    }

    /// `drive[k] += gain · Σ_{j ∈ active} effective(j, k)`, accumulated in
    /// ascending `active` order.
    #[inline]
    pub fn accumulate(&self, active: &[usize], gain: T, drive: &mut [T]) {
        drive.iter_mut().for_each(|d| *d = T::zero());
        for &j in active {
            let row = j * self.n_post..(j + 1) * self.n_post;
            let w = &self.weights[row.clone()];
            let off = &self.eff_offset[row.clone()];
            let scale = &self.eff_scale[row];
            for k in 0..self.n_post {
                drive[k] = drive[k] + off[k] + w[k] * scale[k];
            }
        }
        if gain != T::one() {
            drive.iter_mut().for_each(|d| *d = *d * gain);
        }
    }

    /// Program column `post` with one pulse per presynaptic neuron.
    /// `voltages[j]` is the pulse seen by synapse `(j, post)`.
    pub fn program_column(&mut self, post: usize, voltages: &[T]) -> UpdateCounts {
        let mut counts = UpdateCounts::default();
        let shared = SharedCurve {
            alpha_p: self.params.alpha_p,
            alpha_d: self.params.alpha_d,
            gamma_p: self.params.gamma_p,
            gamma_d: self.params.gamma_d,
        };
        for (j, &v) in voltages.iter().enumerate().take(self.n_pre) {
            let i = j * self.n_post + post;
            let (tp, td) = (self.theta_p[i], self.theta_d[i]);
            if v <= -tp {
                counts.ltp += 1;
            } else if v >= td {
                counts.ltd += 1;
            } else {
                counts.none += 1;
                continue;
            }
            let dev = InstanceCurve {
                shared: &shared,
                theta_p: tp,
                theta_d: td,
            };
            self.weights[i] =
                device::apply_pulse(WeightState::clamped(self.weights[i]), v, &dev).get();
        }
        counts
    }

    pub fn stuck_fraction(&self, v_max_pot: T, v_max_dep: T) -> StuckFraction {
        device::stuck_fraction(&self.instances(), v_max_pot, v_max_dep)
    }
}

struct SharedCurve<T> {
    alpha_p: T,
    alpha_d: T,
    gamma_p: T,
    gamma_d: T,
}

struct InstanceCurve<'a, T> {
    shared: &'a SharedCurve<T>,
    theta_p: T,
    theta_d: T,
}

impl<T: Scalar> Switching<T> for InstanceCurve<'_, T> {
    fn alpha_p(&self) -> T {
        self.shared.alpha_p
    }
    fn alpha_d(&self) -> T {
        self.shared.alpha_d
    }
    fn theta_p(&self) -> T {
        self.theta_p
    }
    fn theta_d(&self) -> T {
        self.theta_d
    }
    fn gamma_p(&self) -> T {
        self.shared.gamma_p
    }
    fn gamma_d(&self) -> T {
        self.shared.gamma_d
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::device::{effective_weight, Preset};

    #[test]
    fn effective_weight_matches_device_formula() {
        let p: DeviceParams<f64> = Preset::CmoHfO2.params();
        let mut inst = DeviceInstance::nominal(&p);
        inst.g_max *= 0.8;
        inst.g_min *= 1.3;
        let w = WeightState::new(0.4).unwrap();
        let m = SynapseMatrix::new(1, 1, vec![w], &[inst], p);
        let direct = effective_weight(w, &inst, p.bounds());
        assert!((m.effective_weight(0, 0) - direct).abs() < 1e-12);
    }

    #[test]
    fn accumulate_sums_active_rows() {
        let p: DeviceParams<f64> = Preset::TiO2.params();
        let ws: Vec<_> = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]
            .iter()
            .map(|&x| WeightState::new(x).unwrap())
            .collect();
        let inst = vec![DeviceInstance::nominal(&p); 6];
        let m = SynapseMatrix::new(3, 2, ws, &inst, p);
        let mut drive = vec![0.0; 2];
        m.accumulate(&[0, 2], 2.0, &mut drive);
        assert!((drive[0] - 2.0 * (0.1 + 0.5)).abs() < 1e-12);
        assert!((drive[1] - 2.0 * (0.2 + 0.6)).abs() < 1e-12);
    }
}
