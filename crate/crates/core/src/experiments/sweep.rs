use rayon::prelude::*;
use serde::Serialize;

use super::{run, RunOutcome, RunSpec};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One swept parameter and its values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAxis {
    pub key: String,
    pub values: Vec<f64>,
}

impl GridAxis {
    pub fn new(key: impl Into<String>, values: Vec<f64>) -> Self {
        GridAxis {
            key: key.into(),
            values,
        }
    }

    /// Parse `key=v1,v2,...`.
    pub fn parse(s: &str) -> Result<Self> {
        let (key, vals) = s
            .split_once('=')
            .ok_or_else(|| Error::Input(format!("grid `{s}` is not key=v1,v2,...")))?;
        let values = vals
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Input(format!("grid `{key}`: `{v}` is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Input(format!("grid `{key}` has no values")));
        }
        Ok(GridAxis::new(key.trim(), values))
    }
}

/// One point of the cartesian product of the axes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridCell {
    pub assignments: Vec<(String, f64)>,
}

impl GridCell {
    pub fn get(&self, key: &str) -> Option<f64> {
        self.assignments
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| *v)
    }

    pub fn label(&self) -> String {
        self.assignments
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

/// Cartesian product in row-major axis order (last axis fastest).
pub fn cells(axes: &[GridAxis]) -> Vec<GridCell> {
    let mut out = vec![GridCell {
        assignments: Vec::new(),
    }];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|cell| {
                axis.values.iter().map(move |&v| {
                    let mut c = cell.clone();
                    c.assignments.push((axis.key.clone(), v));
                    c
                })
            })
            .collect();
    }
    out
}

/// Apply a numeric override to a run spec.
pub fn apply_override<T: Scalar>(spec: &mut RunSpec<T>, key: &str, value: f64) -> Result<()> {
    let net = &mut spec.network;
    match key {
        "sf_p" => net.vdsp.sf_p = T::of(value),
        "sf_pd" => net.vdsp.sf_pd = T::of(value),
        "v_mid" => net.vdsp.v_mid = T::of(value),
        "rsd_theta" => net.variability.rsd_theta = value,
        "rsd_hrs" => net.variability.rsd_hrs = value,
        "rsd_lrs" => net.variability.rsd_lrs = value,
        "synapse_gain" => net.synapse_gain = T::of(value),
        "neurons" | "n_outputs" => net.n_outputs = value as usize,
        "seed" => net.seed = value as u64,
        "input_start" => {
            net.input_start = if value == 0.0 {
                crate::snn::InputStart::Rest
            } else {
                crate::snn::InputStart::Biased
            }
        }
        "t_wta" => net.t_wta = T::of(value),
        "inc_n" => net.output.inc_n = T::of(value),
        "tau_adap" => net.output.tau_adap = T::of(value),
        "v_th_out" => net.output.lif.v_th = T::of(value),
        "tau_mem_out" => net.output.lif.tau_mem = T::of(value),
        "tau_mem_in" => net.input.tau_mem = T::of(value),
        "i_max" => spec.presentation.encoding.i_max = value,
        "sigma_noise" => spec.presentation.encoding.sigma_noise = value,
        "bias_b" => spec.presentation.encoding.bias_b = value,
        "duration" => spec.presentation.duration = value,
        "epochs" => spec.train.epochs = value as usize,
        "n_train" => spec.train.n_train_samples = Some(value as usize),
        other => return Err(Error::Input(format!("`{other}` cannot be swept"))),
    }
    Ok(())
}

/// Result of one (cell, seed) job.
#[derive(Debug, Clone, Serialize)]
pub struct GridRun {
    pub cell: GridCell,
    pub seed: u64,
    pub outcome: RunOutcome,
    pub wall_time_s: f64,
}

/// Run every cell for every seed, up to `workers` jobs at a time. Results
/// come back in (cell, seed) order regardless of scheduling.
pub fn run_grid<T: Scalar>(
    base: &RunSpec<T>,
    axes: &[GridAxis],
    seeds: &[u64],
    workers: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<Vec<GridRun>> {
    let jobs: Vec<(GridCell, u64)> = cells(axes)
        .into_iter()
        .flat_map(|c| seeds.iter().map(move |&s| (c.clone(), s)))
        .collect();
    let exec = |(cell, seed): &(GridCell, u64)| -> Result<GridRun> {
        let mut spec = base.clone();
        for (k, v) in &cell.assignments {
            apply_override(&mut spec, k, *v)?;
        }
        spec.network.seed = *seed;
        let started = std::time::Instant::now();
        let (_, outcome) = run(&spec, train, test)?;
        Ok(GridRun {
            cell: cell.clone(),
            seed: *seed,
            outcome,
            wall_time_s: started.elapsed().as_secs_f64(),
        })
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
    pool.install(|| jobs.par_iter().map(exec).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: GridCell,
    pub runs: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub mean_stuck_pot: f64,
    pub mean_stuck_dep: f64,
    pub mean_stuck_either: f64,
}

/// Mean and sample standard deviation (0 for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Mean/std per cell, cells in first-appearance order.
pub fn aggregate(runs: &[GridRun]) -> Vec<CellSummary> {
    let mut order: Vec<GridCell> = Vec::new();
    for r in runs {
        if !order.contains(&r.cell) {
            order.push(r.cell.clone());
        }
    }
    order
        .into_iter()
        .map(|cell| {
            let mine: Vec<&GridRun> = runs.iter().filter(|r| r.cell == cell).collect();
            let pick = |f: &dyn Fn(&GridRun) -> f64| mine.iter().map(|r| f(r)).collect::<Vec<_>>();
            let (mean_accuracy, std_accuracy) = mean_std(&pick(&|r| r.outcome.eval.accuracy));
            CellSummary {
                runs: mine.len(),
                mean_accuracy,
                std_accuracy,
                mean_stuck_pot: mean_std(&pick(&|r| r.outcome.stuck.pot)).0,
                mean_stuck_dep: mean_std(&pick(&|r| r.outcome.stuck.dep)).0,
                mean_stuck_either: mean_std(&pick(&|r| r.outcome.stuck.either)).0,
                cell,
            }
        })
        .collect()
}

/// Threshold-variability × scaling-factor grid.
#[allow(clippy::too_many_arguments)]
pub fn sweep_variability<T: Scalar>(
    base: &RunSpec<T>,
    rsd_key: &str,
    rsd_values: &[f64],
    sf_values: &[f64],
    seeds: &[u64],
    workers: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Vec<GridRun>, Vec<CellSummary>)> {
    if rsd_values.is_empty() || sf_values.is_empty() {
        return Err(Error::Input(
            "variability sweep needs nonempty grids".into(),
        ));
    }
    let axes = [
        GridAxis::new(rsd_key, rsd_values.to_vec()),
        GridAxis::new("sf_p", sf_values.to_vec()),
    ];
    let runs = run_grid(base, &axes, seeds, workers, train, test)?;
    let summary = aggregate(&runs);
    Ok((runs, summary))
}

#[derive(Debug, Clone, Serialize)]
pub struct SfSweep {
    pub cells: Vec<CellSummary>,
    /// Index into `cells` of the highest mean accuracy (first on ties).
    pub best: usize,
}

pub fn best_cell(cells: &[CellSummary]) -> usize {
    let mut best = 0;
    for (i, c) in cells.iter().enumerate() {
        if c.mean_accuracy > cells[best].mean_accuracy {
            best = i;
        }
    }
    best
}

/// `sf_p × sf_pd` grid search.
#[allow(clippy::too_many_arguments)]
pub fn sweep_sf<T: Scalar>(
    base: &RunSpec<T>,
    sf_p: &[f64],
    sf_pd: &[f64],
    seeds: &[u64],
    workers: usize,
    train: &Dataset,
    test: &Dataset,
) -> Result<(Vec<GridRun>, SfSweep)> {
    if sf_p.is_empty() || sf_pd.is_empty() {
        return Err(Error::Input(
            "scaling-factor sweep needs nonempty grids".into(),
        ));
    }
    let axes = [
        GridAxis::new("sf_p", sf_p.to_vec()),
        GridAxis::new("sf_pd", sf_pd.to_vec()),
    ];
    let runs = run_grid(base, &axes, seeds, workers, train, test)?;
    let cells = aggregate(&runs);
    let best = best_cell(&cells);
    Ok((runs, SfSweep { cells, best }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_cardinality() {
        let axes = [
            GridAxis::parse("rsd_theta=0,0.1,0.2,0.5").unwrap(),
            GridAxis::parse("sf_p=1.05,1.2").unwrap(),
        ];
        let cs = cells(&axes);
        assert_eq!(cs.len(), 8);
        assert_eq!(cs[1].get("sf_p"), Some(1.2));
        assert_eq!(cs[1].get("rsd_theta"), Some(0.0));
    }

    #[test]
    fn bad_grids() {
        assert!(GridAxis::parse("sf_p").is_err());
        assert!(GridAxis::parse("sf_p=a,1").is_err());
    }

    #[test]
    fn mean_std_basic() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(mean_std(&[0.5]).1, 0.0);
    }
}
