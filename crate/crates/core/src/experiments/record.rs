use serde::Serialize;

use super::{CheckpointResult, RunOutcome, TrainSummary, CLASSES};
use crate::config::RunConfig;
use crate::device::StuckFraction;
use crate::error::{Error, Result};

/// One line of a JSON-lines result file. Everything except `wall_time_s`
/// is a deterministic function of the resolved config and the data.
#[derive(Debug, Clone, Serialize)]
pub struct RunRecord {
    pub kind: String,
    pub config_hash: String,
    pub seed: u64,
    pub device: String,
    pub neurons: usize,
    /// Assignments of a sweep cell on top of the config, if any.
    pub cell: Vec<(String, f64)>,
    pub accuracy: f64,
    pub correct: usize,
    pub test_samples: usize,
    /// Rows: true class; columns: predicted class, last column "no prediction".
    pub confusion: Vec<[u32; CLASSES + 1]>,
    pub unlabeled_neurons: usize,
    pub silent_samples: usize,
    pub mean_output_spikes: f64,
    pub stuck: StuckFraction,
    pub train: TrainSummary,
    pub labels: Vec<Option<u8>>,
    pub checkpoints: Vec<CheckpointResult>,
    pub config: serde_json::Value,
    pub wall_time_s: f64,
}

impl RunRecord {
    pub fn new(kind: &str, cfg: &RunConfig, outcome: &RunOutcome, wall_time_s: f64) -> Self {
        RunRecord {
            kind: kind.to_string(),
            config_hash: cfg.content_hash(),
            seed: cfg.spec.network.seed,
            device: cfg.spec.network.device_name.clone(),
            neurons: cfg.spec.network.n_outputs,
            cell: Vec::new(),
            accuracy: outcome.eval.accuracy,
            correct: outcome.eval.correct,
            test_samples: outcome.eval.samples,
            confusion: outcome.eval.confusion.clone(),
            unlabeled_neurons: outcome.eval.unlabeled_neurons,
            silent_samples: outcome.eval.silent_samples,
            mean_output_spikes: outcome.eval.mean_output_spikes,
            stuck: outcome.stuck,
            train: outcome.train,
            labels: outcome.labels.labels.clone(),
            checkpoints: outcome.checkpoints.clone(),
            config: cfg.to_json(),
            wall_time_s,
        }
    }

    pub fn to_json_line(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }
}
