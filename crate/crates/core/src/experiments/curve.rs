use serde::Serialize;

use super::{run, RunSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Accuracy at one training-sample count, over repeats.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoint {
    pub samples_seen: u64,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub repeats: usize,
}

/// Accuracy vs. number of training samples. Every seed trains one network
/// and is evaluated on `spec.n_checkpoint_test` test samples at each
/// checkpoint; the final point uses the full evaluation of `spec`.
pub fn incremental_curve<T: Scalar>(
    spec: &RunSpec<T>,
    checkpoints: &[u64],
    seeds: &[u64],
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<CurvePoint>> {
    if seeds.is_empty() {
        return Err(Error::Input(
            "incremental curve needs at least one seed".into(),
        ));
    }
    let mut per_seed: Vec<Vec<(u64, f64)>> = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut s = spec.clone();
        s.network.seed = seed;
        s.train.checkpoints = checkpoints.to_vec();
        let (_, outcome) = run(&s, train, test)?;
        let mut points: Vec<(u64, f64)> = outcome
            .checkpoints
            .iter()
            .map(|c| (c.samples_seen, c.accuracy))
            .collect();
        if points
            .last()
            .is_none_or(|p| p.0 != outcome.train.samples_seen)
        {
            points.push((outcome.train.samples_seen, outcome.eval.accuracy));
        }
        per_seed.push(points);
    }
    let n = per_seed[0].len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let accs: Vec<f64> = per_seed.iter().map(|p| p[i].1).collect();
        let (mean, std) = super::mean_std(&accs);
        out.push(CurvePoint {
            samples_seen: per_seed[0][i].0,
            mean_accuracy: mean,
            std_accuracy: std,
            repeats: accs.len(),
        });
    }
    Ok(out)
}
