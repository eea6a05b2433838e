//! Unsupervised training, neuron labeling, evaluation and parameter sweeps.

mod calibrate;
mod curve;
mod record;
mod sweep;

pub use calibrate::{calibrate_encoding, EncodingPoint};
pub use curve::{incremental_curve, CurvePoint};
pub use record::RunRecord;
pub use sweep::{
    aggregate, apply_override, best_cell, cells, mean_std, run_grid, sweep_sf, sweep_variability,
    CellSummary, GridAxis, GridCell, GridRun, SfSweep,
};

use serde::Serialize;

use crate::data::Dataset;
use crate::encoding::{EncodingConfig, PixelEncoder};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seed;
use crate::snn::{Network, NetworkConfig, SampleResponse, UpdateCounts};

pub const CLASSES: usize = 10;
/// Confusion column used when no class is predicted.
pub const NO_PREDICTION: usize = CLASSES;

/// Seed streams of the three presentation phases.
pub mod phase {
    pub const TRAIN: &str = "phase-train";
    pub const LABEL: &str = "phase-label";
    pub const TEST: &str = "phase-test";
}

/// How samples are turned into currents and presented.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Presentation {
    pub encoding: EncodingConfig,
    /// Presentation time per sample (s).
    pub duration: f64,
}

impl Default for Presentation {
    fn default() -> Self {
        Presentation {
            encoding: EncodingConfig::default(),
            duration: 0.040,
        }
    }
}

/// Present sample `i` of `ds` under noise stream `(stream_seed, index)`.
pub fn present<T: Scalar>(
    net: &mut Network<T>,
    ds: &Dataset,
    i: usize,
    presentation: &Presentation,
    stream_seed: u64,
    index: u64,
    learning: bool,
) -> SampleResponse {
    let mut enc = PixelEncoder::<T>::new(ds.image(i), &presentation.encoding, stream_seed, index);
    let steps = net.config().steps_for(T::of(presentation.duration)).max(1);
    net.present(&mut enc, steps, learning)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSpec {
    pub epochs: usize,
    /// Samples used per epoch; `None` means the whole set.
    pub n_train_samples: Option<usize>,
    /// Sample counts (cumulative over epochs) at which to call back.
    pub checkpoints: Vec<u64>,
}

impl TrainSpec {
    pub fn validate(&self) -> Result<()> {
        if self.checkpoints.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::validation("checkpoints", "must be sorted ascending"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct TrainSummary {
    pub samples_seen: u64,
    pub output_spikes: u64,
    pub input_spikes: u64,
    pub updates: UpdateCounts,
}

/// Train without labels, presenting samples in dataset order each epoch.
/// `on_checkpoint(samples_seen, net)` runs when a checkpoint count is reached
/// (a checkpoint at 0 fires before any training).
pub fn train_unsupervised<T: Scalar>(
    net: &mut Network<T>,
    train: &Dataset,
    spec: &TrainSpec,
    presentation: &Presentation,
    mut on_checkpoint: impl FnMut(u64, &mut Network<T>),
) -> Result<TrainSummary> {
    spec.validate()?;
    if train.is_empty() {
        return Err(Error::Input("training set is empty".into()));
    }
    let per_epoch = spec.n_train_samples.unwrap_or(train.len()).min(train.len());
    let stream = seed::child(net.config().seed, phase::TRAIN, 0);
    let mut summary = TrainSummary::default();
    let mut next_cp = spec.checkpoints.iter().peekable();
    while let Some(&&cp) = next_cp.peek() {
        if cp > 0 {
            break;
        }
        on_checkpoint(0, net);
        next_cp.next();
    }
    for _epoch in 0..spec.epochs {
        for i in 0..per_epoch {
            let r = present(
                net,
                train,
                i,
                presentation,
                stream,
                summary.samples_seen,
                true,
            );
            summary.samples_seen += 1;
            summary.output_spikes += r.total_spikes() as u64;
            summary.input_spikes += r.input_spikes;
            summary.updates += r.updates;
            while let Some(&&cp) = next_cp.peek() {
                if cp > summary.samples_seen {
                    break;
                }
                on_checkpoint(summary.samples_seen, net);
                next_cp.next();
            }
        }
    }
    Ok(summary)
}

/// Class assigned to each output neuron; `None` if it never fired.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct LabelMap {
    pub labels: Vec<Option<u8>>,
    /// Spikes per neuron per class.
    pub votes: Vec<[u32; CLASSES]>,
}

impl LabelMap {
    pub fn unlabeled(&self) -> usize {
        self.labels.iter().filter(|l| l.is_none()).count()
    }

    /// Label each neuron by the class it fired most for; ties go to the lower class.
    pub fn from_votes(votes: Vec<[u32; CLASSES]>) -> Self {
        let labels = votes
            .iter()
            .map(|v| {
                let (best, &count) =
                    v.iter().enumerate().fold(
                        (0, &0),
                        |acc, (c, n)| if *n > *acc.1 { (c, n) } else { acc },
                    );
                (count > 0).then_some(best as u8)
            })
            .collect();
        LabelMap { labels, votes }
    }
}

/// Present `labeled` with learning off and label every output neuron.
pub fn assign_labels<T: Scalar>(
    net: &mut Network<T>,
    labeled: &Dataset,
    presentation: &Presentation,
) -> LabelMap {
    let stream = seed::child(net.config().seed, phase::LABEL, 0);
    net.reset_adaptation();
    let mut votes = vec![[0u32; CLASSES]; net.config().n_outputs];
    for i in 0..labeled.len() {
        let r = present(net, labeled, i, presentation, stream, i as u64, false);
        let class = labeled.label(i) as usize;
        for (v, &c) in votes.iter_mut().zip(&r.counts) {
            v[class] += c;
        }
    }
    LabelMap::from_votes(votes)
}

/// Predicted class for one response: label of the neuron with most spikes,
/// ties broken by earliest first spike, then lowest index. `None` when no
/// neuron fired or the winner has no label.
pub fn predict(response: &SampleResponse, labels: &LabelMap) -> Option<u8> {
    let mut best: Option<(usize, u32, u32)> = None;
    for (k, (&count, first)) in response
        .counts
        .iter()
        .zip(&response.first_spike)
        .enumerate()
    {
        if count == 0 {
            continue;
        }
        let first = first.unwrap_or(u32::MAX);
        let better = match best {
            None => true,
            Some((_, bc, bf)) => count > bc || (count == bc && first < bf),
        };
        if better {
            best = Some((k, count, first));
        }
    }
    best.and_then(|(k, _, _)| labels.labels[k])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalResult {
    pub accuracy: f64,
    pub samples: usize,
    pub correct: usize,
    /// `confusion[true][predicted]`; column 10 holds samples with no prediction.
    pub confusion: Vec<[u32; CLASSES + 1]>,
    pub unlabeled_neurons: usize,
    pub silent_samples: usize,
    pub mean_output_spikes: f64,
    pub mean_input_spikes: f64,
}

impl EvalResult {
    pub fn empty(unlabeled_neurons: usize) -> Self {
        EvalResult {
            accuracy: 0.0,
            samples: 0,
            correct: 0,
            confusion: vec![[0; CLASSES + 1]; CLASSES],
            unlabeled_neurons,
            silent_samples: 0,
            mean_output_spikes: 0.0,
            mean_input_spikes: 0.0,
        }
    }

    /// Fold one sample in. Silent samples count as wrong.
    pub fn record(&mut self, truth: u8, response: &SampleResponse, labels: &LabelMap) {
        let pred = predict(response, labels);
        let total = response.total_spikes();
        if total == 0 {
            self.silent_samples += 1;
        }
        let col = pred.map_or(NO_PREDICTION, |p| p as usize);
        self.confusion[truth as usize][col] += 1;
        if pred == Some(truth) {
            self.correct += 1;
        }
        let n = self.samples as f64;
        self.mean_output_spikes = (self.mean_output_spikes * n + total as f64) / (n + 1.0);
        self.mean_input_spikes =
            (self.mean_input_spikes * n + response.input_spikes as f64) / (n + 1.0);
        self.samples += 1;
        self.accuracy = self.correct as f64 / self.samples as f64;
    }
}

/// Classify `test` with frozen weights.
pub fn evaluate<T: Scalar>(
    net: &mut Network<T>,
    labels: &LabelMap,
    test: &Dataset,
    presentation: &Presentation,
) -> EvalResult {
    let stream = seed::child(net.config().seed, phase::TEST, 0);
    net.reset_adaptation();
    let mut result = EvalResult::empty(labels.unlabeled());
    for i in 0..test.len() {
        let r = present(net, test, i, presentation, stream, i as u64, false);
        result.record(test.label(i), &r, labels);
    }
    result
}

/// Everything one training run needs.
#[derive(Debug, Clone)]
pub struct RunSpec<T> {
    pub network: NetworkConfig<T>,
    pub presentation: Presentation,
    pub train: TrainSpec,
    /// Size of the labeling set (taken from the end of the training samples used).
    pub n_label: usize,
    /// Test samples for the final evaluation (`None` = all).
    pub n_test: Option<usize>,
    /// Test samples used at intermediate checkpoints.
    pub n_checkpoint_test: usize,
}

impl<T: Scalar> RunSpec<T> {
    pub fn new(network: NetworkConfig<T>) -> Self {
        RunSpec {
            network,
            presentation: Presentation::default(),
            train: TrainSpec {
                epochs: 1,
                n_train_samples: None,
                checkpoints: Vec::new(),
            },
            n_label: 10_000,
            n_test: None,
            n_checkpoint_test: 2_000,
        }
    }

    /// Apply the encoding bias to the input layer.
    pub fn resolved_network(&self) -> NetworkConfig<T> {
        let mut cfg = self.network.clone();
        cfg.input.bias = T::of(self.presentation.encoding.bias_b);
        cfg
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckpointResult {
    pub samples_seen: u64,
    pub accuracy: f64,
    pub test_samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunOutcome {
    pub train: TrainSummary,
    pub eval: EvalResult,
    pub labels: LabelMap,
    pub checkpoints: Vec<CheckpointResult>,
    pub stuck: crate::device::StuckFraction,
}

/// The labeling set: the last `n_label` of the training samples actually
/// used, or all of them when fewer were used.
pub fn labeling_set(train: &Dataset, spec: &TrainSpec, n_label: usize) -> Dataset {
    let used = spec.n_train_samples.unwrap_or(train.len()).min(train.len());
    train.head(used).tail(n_label)
}

/// Build, train, label and evaluate one network. Returns the trained network too.
pub fn run<T: Scalar>(
    spec: &RunSpec<T>,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Network<T>, RunOutcome)> {
    let mut net = Network::build(spec.resolved_network())?;
    let labeling = labeling_set(train, &spec.train, spec.n_label);
    let cp_test = test.head(spec.n_checkpoint_test);
    let mut checkpoints = Vec::new();
    let summary = train_unsupervised(
        &mut net,
        train,
        &spec.train,
        &spec.presentation,
        |seen, net| {
            let mut frozen = net.clone();
            let labels = assign_labels(&mut frozen, &labeling, &spec.presentation);
            let eval = evaluate(&mut frozen, &labels, &cp_test, &spec.presentation);
            checkpoints.push(CheckpointResult {
                samples_seen: seen,
                accuracy: eval.accuracy,
                test_samples: eval.samples,
            });
        },
    )?;
    let final_test = match spec.n_test {
        Some(n) => test.head(n),
        None => test.clone(),
    };
    let mut frozen = net.clone();
    let labels = assign_labels(&mut frozen, &labeling, &spec.presentation);
    let eval = evaluate(&mut frozen, &labels, &final_test, &spec.presentation);
    let stuck = net.stuck_fraction();
    Ok((
        net,
        RunOutcome {
            train: summary,
            eval,
            labels,
            checkpoints,
            stuck,
        },
    ))
}
