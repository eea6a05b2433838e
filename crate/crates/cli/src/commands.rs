use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use vdsp::characterization::{self as chr, FitOptions, ProtocolSpec};
use vdsp::config::{parse_override, Assignment, RunConfig};
use vdsp::data::{self, Dataset, Split};
use vdsp::device::{pulse_train_trace, DeviceParams, Preset, WeightState};
use vdsp::experiments::{self, GridAxis, RunRecord};
use vdsp::io::write_atomic;
use vdsp::snn::{self, Network, SnapshotMeta};
use vdsp::{Error, Real};

pub enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::Validation { .. } | Error::Input(_) | Error::Parse { .. } => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

type CmdResult = Result<(), Failure>;

#[derive(Parser)]
#[command(
    name = "vdsp",
    version,
    about = "Memristive VDSP device fitting and spiking-network simulation"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Random-amplitude write protocol as CSV.
    ProtocolGen(ProtocolGenArgs),
    /// Drive a device model through a protocol and log characterization records.
    SimProtocol(SimProtocolArgs),
    /// Fit switching parameters to characterization records.
    Fit(FitArgs),
    /// Weight trace under N potentiating then N depressing pulses.
    DeviceTrace(DeviceTraceArgs),
    /// Input-layer spike counts and LTD/LTP rates over a bias × noise grid.
    CalibrateEncoding(CalibrateArgs),
    /// Train, label and evaluate one network.
    Train(TrainArgs),
    /// Evaluate a saved weight snapshot.
    Eval(EvalArgs),
    /// Run a parameter grid over several seeds.
    Sweep(SweepArgs),
    /// Convert a weight snapshot to CSV and/or PGM receptive fields.
    ExportWeights(ExportArgs),
}

#[derive(Args)]
struct ProtocolGenArgs {
    #[arg(long, allow_hyphen_values = true)]
    vmin: f64,
    #[arg(long)]
    vmax: f64,
    #[arg(long = "n")]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 200e-9)]
    pulse_width: f64,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimProtocolArgs {
    #[arg(long, default_value = "tio2")]
    device: String,
    /// Protocol CSV from `protocol-gen`.
    #[arg(long)]
    protocol: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    w0: f64,
    #[arg(long, default_value_t = 0.0)]
    read_noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct FitArgs {
    /// Characterization record CSV.
    records: PathBuf,
    /// Start from a preset's parameters instead of the data-derived guess.
    #[arg(long)]
    init_device: Option<String>,
    #[arg(long, default_value_t = 1)]
    multistart: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the fitted `[device]` block here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DeviceTraceArgs {
    #[arg(long, default_value = "tio2")]
    device: String,
    #[arg(long, default_value_t = 50)]
    pulses: usize,
    /// Pulse amplitude as a multiple of the switching threshold.
    #[arg(long, default_value_t = 1.2)]
    sf: f64,
    #[arg(long, default_value_t = 0.0)]
    w0: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Options shared by the network pipelines.
#[derive(Args, Clone, Default)]
struct PipelineArgs {
    /// Config file (sectioned `key = value`).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    device: Option<String>,
    #[arg(long)]
    neurons: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    mnist: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
    /// Any config key, `section.key=value` (or `key=value` when unambiguous).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    #[arg(long, value_delimiter = ',', default_values_t = [0.3, 0.6, 0.8, 0.9, 0.95])]
    bias: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.3, 0.6])]
    sigma: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    trials: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// Snapshot descriptor written by `train`.
    #[arg(long)]
    snapshot: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    pipeline: PipelineArgs,
    /// `key=v1,v2,...`; repeat for more axes.
    #[arg(long = "grid", required = true)]
    grid: Vec<String>,
    /// Seeds per cell (defaults to the config seed).
    #[arg(long, value_delimiter = ',')]
    seeds: Vec<u64>,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    snapshot: PathBuf,
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for one PGM image per output neuron.
    #[arg(long)]
    pgm: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> CmdResult {
    match cli.command {
        Command::ProtocolGen(a) => protocol_gen(a),
        Command::SimProtocol(a) => sim_protocol(a),
        Command::Fit(a) => fit(a),
        Command::DeviceTrace(a) => device_trace(a),
        Command::CalibrateEncoding(a) => calibrate(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Sweep(a) => sweep(a),
        Command::ExportWeights(a) => export(a),
    }
}

fn require_file(path: &Path) -> CmdResult {
    if path.is_file() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{}: no such file", path.display())))
    }
}

fn preset(name: &str) -> Result<Preset, Failure> {
    name.parse::<Preset>().map_err(Failure::from)
}

/// Write to `out` atomically, or to standard output.
fn emit(out: Option<&Path>, text: &str) -> CmdResult {
    match out {
        Some(p) => {
            ensure_parent(p)?;
            write_atomic(p, text.as_bytes()).map_err(Failure::from)
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn ensure_parent(path: &Path) -> CmdResult {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => std::fs::create_dir_all(dir)
            .map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display()))),
        _ => Ok(()),
    }
}

fn protocol_gen(a: ProtocolGenArgs) -> CmdResult {
    let mut spec = ProtocolSpec::new(a.vmin, a.vmax, a.n, a.seed);
    spec.pulse_width = a.pulse_width;
    let volts = chr::generate_protocol(&spec)?;
    let mut text = String::from("v_pulse_V,pulse_width_s\n");
    for v in &volts {
        let _ = writeln!(text, "{v},{}", spec.pulse_width);
    }
    emit(a.out.as_deref(), &text)?;
    if let Some(p) = &a.out {
        println!("wrote {} pulses to {}", volts.len(), p.display());
    }
    Ok(())
}

fn read_protocol(path: &Path) -> Result<(Vec<f64>, f64), Failure> {
    require_file(path)?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "v_pulse_V,pulse_width_s" => {}
        _ => {
            return Err(Failure::Usage(format!(
                "{}: line 1: expected header `v_pulse_V,pulse_width_s`",
                path.display()
            )))
        }
    }
    let mut volts = Vec::new();
    let mut width = 0.0;
    for (i, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let bad = || {
            Failure::Usage(format!(
                "{}: line {}: malformed row `{line}`",
                path.display(),
                i + 1
            ))
        };
        let (v, w) = line.split_once(',').ok_or_else(bad)?;
        volts.push(v.trim().parse::<f64>().map_err(|_| bad())?);
        width = w.trim().parse::<f64>().map_err(|_| bad())?;
    }
    Ok((volts, width))
}

fn sim_protocol(a: SimProtocolArgs) -> CmdResult {
    let params: DeviceParams<f64> = preset(&a.device)?.params();
    let (volts, width) = read_protocol(&a.protocol)?;
    let w0 = WeightState::new(a.w0)?;
    let records = chr::simulate_protocol(&params, &volts, w0, a.read_noise, width, a.seed)?;
    let bytes = chr::records_to_csv(&records)?;
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            write_atomic(p, &bytes)?;
            println!("wrote {} records to {}", records.len(), p.display());
        }
        None => print!("{}", String::from_utf8_lossy(&bytes)),
    }
    Ok(())
}

fn fit(a: FitArgs) -> CmdResult {
    require_file(&a.records)?;
    let records = chr::load_records(&a.records)?;
    let init = a
        .init_device
        .as_deref()
        .map(preset)
        .transpose()?
        .map(|p| p.params::<f64>());
    let opts = FitOptions {
        starts: a.multistart,
        seed: a.seed,
        ..FitOptions::default()
    };
    let result = chr::fit_params(&records, init.as_ref(), &opts)?;
    print!("{}", result.report());
    let block = result.config_block();
    match &a.out {
        Some(p) => {
            ensure_parent(p)?;
            write_atomic(p, block.as_bytes())?;
            println!("wrote {}", p.display());
        }
        None => print!("\n{block}"),
    }
    Ok(())
}

fn device_trace(a: DeviceTraceArgs) -> CmdResult {
    let p: DeviceParams<f64> = preset(&a.device)?.params();
    if !(a.sf > 0.0) {
        return Err(Failure::Usage("--sf must be > 0".into()));
    }
    let v_pot = -a.sf * p.theta_p;
    let v_dep = a.sf * p.theta_d;
    let volts: Vec<f64> = std::iter::repeat_n(v_pot, a.pulses)
        .chain(std::iter::repeat_n(v_dep, a.pulses))
        .collect();
    let trace = pulse_train_trace(&p, &volts, WeightState::new(a.w0)?);
    let mut text = String::from("pulse,v_pulse_V,w\n");
    for (i, w) in trace.iter().enumerate() {
        let v = if i == 0 { 0.0 } else { volts[i - 1] };
        let _ = writeln!(text, "{i},{v},{}", w.get());
    }
    emit(a.out.as_deref(), &text)?;
    if let Some(p) = &a.out {
        println!("wrote {} rows to {}", trace.len(), p.display());
    }
    Ok(())
}

fn resolve(p: &PipelineArgs) -> Result<RunConfig, Failure> {
    let mut overrides: Vec<Assignment> = Vec::new();
    let mut push = |key: &str, value: String| {
        overrides.push(Assignment {
            section: key.split('.').next().unwrap_or_default().to_string(),
            key: key.split('.').nth(1).unwrap_or_default().to_string(),
            value,
            origin: "command line".into(),
        })
    };
    if let Some(d) = &p.device {
        push("device.preset", d.clone());
    }
    if let Some(n) = p.neurons {
        push("network.neurons", n.to_string());
    }
    if let Some(e) = p.epochs {
        push("experiment.epochs", e.to_string());
    }
    if let Some(s) = p.seed {
        push("experiment.seed", s.to_string());
    }
    if let Some(w) = p.workers {
        push("experiment.workers", w.to_string());
    }
    if let Some(m) = &p.mnist {
        push("io.mnist_dir", m.display().to_string());
    }
    if let Some(o) = &p.out {
        push("io.out_dir", o.display().to_string());
    }
    let mut errors = Vec::new();
    for s in &p.set {
        match parse_override(s) {
            Ok(a) => overrides.push(a),
            Err(e) => errors.push(e.to_string()),
        }
    }
    if !errors.is_empty() {
        return Err(Failure::Usage(errors.join("\n")));
    }
    let cfg = match &p.config {
        Some(path) => {
            require_file(path)?;
            RunConfig::from_file(path, &overrides)?
        }
        None => RunConfig::resolve(&overrides)?,
    };
    Ok(cfg)
}

fn load_mnist(cfg: &RunConfig) -> Result<(Dataset, Dataset), Failure> {
    let dir = &cfg.mnist_dir;
    let find = |split| {
        data::locate(dir, split).ok_or_else(|| {
            Failure::Usage(format!(
                "{}: MNIST IDX files not found (see scripts/fetch_mnist.sh)",
                dir.display()
            ))
        })
    };
    let (ti, tl) = find(Split::Train)?;
    let (vi, vl) = find(Split::Test)?;
    let train = data::load_mnist_idx(ti, tl)?;
    let test = data::load_mnist_idx(vi, vl)?;
    if train.pixels() != cfg.spec.network.n_inputs {
        return Err(Failure::Usage(format!(
            "network.n_inputs = {} but the images have {} pixels",
            cfg.spec.network.n_inputs,
            train.pixels()
        )));
    }
    Ok((train, test))
}

fn create_out_dir(cfg: &RunConfig) -> CmdResult {
    std::fs::create_dir_all(&cfg.out_dir)
        .map_err(|e| Failure::Runtime(format!("{}: {e}", cfg.out_dir.display())))
}

/// Append lines to a JSON-lines file, rewriting it atomically.
fn append_jsonl(path: &Path, lines: &[String]) -> CmdResult {
    let mut text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => String::new(),
        Err(e) => return Err(Failure::Runtime(format!("{}: {e}", path.display()))),
    };
    for l in lines {
        text.push_str(l);
        text.push('\n');
    }
    write_atomic(path, text.as_bytes()).map_err(Failure::from)
}

fn calibrate(a: CalibrateArgs) -> CmdResult {
    let cfg = resolve(&a.pipeline)?;
    let points = experiments::calibrate_encoding(
        &cfg.spec,
        &a.bias,
        &a.sigma,
        a.trials,
        cfg.spec.network.seed,
    )?;
    let mut text = String::from(
        "bias_b,sigma_noise,saturated_spikes,background_spikes,background_ltd_rate,saturated_ltp_rate\n",
    );
    for p in &points {
        let _ = writeln!(
            text,
            "{},{},{},{},{},{}",
            p.bias_b,
            p.sigma_noise,
            p.saturated_spikes,
            p.background_spikes,
            p.background_ltd_rate,
            p.saturated_ltp_rate
        );
    }
    if a.pipeline.out.is_some() {
        create_out_dir(&cfg)?;
        let path = cfg.out_dir.join("encoding.csv");
        write_atomic(&path, text.as_bytes())?;
        println!("wrote {}", path.display());
    } else {
        print!("{text}");
    }
    Ok(())
}

fn train(a: TrainArgs) -> CmdResult {
    let cfg = resolve(&a.pipeline)?;
    let (train, test) = load_mnist(&cfg)?;
    create_out_dir(&cfg)?;
    let started = Instant::now();
    let (net, outcome) = experiments::run(&cfg.spec, &train, &test)?;
    let record = RunRecord::new("train", &cfg, &outcome, started.elapsed().as_secs_f64());

    let out = &cfg.out_dir;
    write_atomic(&out.join("config.cfg"), cfg.render().as_bytes())?;
    let meta = SnapshotMeta {
        rows: net.config().n_inputs,
        cols: net.config().n_outputs,
        device: cfg.spec.network.device_name.clone(),
        seed: cfg.spec.network.seed,
        samples: outcome.train.samples_seen,
    };
    snn::write_snapshot(&out.join("weights.snap"), &meta, net.synapses().weights())?;
    append_jsonl(&out.join("results.jsonl"), &[record.to_json_line()?])?;
    if !outcome.checkpoints.is_empty() {
        let mut text = String::from("samples_seen,accuracy,test_samples\n");
        for c in &outcome.checkpoints {
            let _ = writeln!(text, "{},{},{}", c.samples_seen, c.accuracy, c.test_samples);
        }
        write_atomic(&out.join("curve.csv"), text.as_bytes())?;
    }
    println!(
        "{} neurons={} seed={} accuracy={:.4} silent={} unlabeled={} stuck(pot/dep)={:.3}/{:.3} time={:.1}s",
        record.device,
        record.neurons,
        record.seed,
        record.accuracy,
        record.silent_samples,
        record.unlabeled_neurons,
        record.stuck.pot,
        record.stuck.dep,
        record.wall_time_s
    );
    println!("results in {}", out.display());
    Ok(())
}

fn eval(a: EvalArgs) -> CmdResult {
    let cfg = resolve(&a.pipeline)?;
    require_file(&a.snapshot)?;
    let (meta, weights) = snn::read_snapshot(&a.snapshot)?;
    let netcfg = cfg.spec.resolved_network();
    if meta.rows != netcfg.n_inputs || meta.cols != netcfg.n_outputs {
        return Err(Failure::Usage(format!(
            "snapshot is {}x{} but the config describes {}x{}",
            meta.rows, meta.cols, netcfg.n_inputs, netcfg.n_outputs
        )));
    }
    let (train, test) = load_mnist(&cfg)?;
    create_out_dir(&cfg)?;
    let started = Instant::now();
    let w: Vec<WeightState<Real>> = weights
        .iter()
        .map(|&x| WeightState::new(x as Real))
        .collect::<vdsp::Result<_>>()?;
    let mut net = Network::with_weights(netcfg, w)?;
    let labeling = experiments::labeling_set(&train, &cfg.spec.train, cfg.spec.n_label);
    let labels = experiments::assign_labels(&mut net, &labeling, &cfg.spec.presentation);
    let test = match cfg.spec.n_test {
        Some(n) => test.head(n),
        None => test,
    };
    let result = experiments::evaluate(&mut net, &labels, &test, &cfg.spec.presentation);
    let outcome = experiments::RunOutcome {
        train: Default::default(),
        stuck: net.stuck_fraction(),
        eval: result,
        labels,
        checkpoints: Vec::new(),
    };
    let record = RunRecord::new("eval", &cfg, &outcome, started.elapsed().as_secs_f64());
    append_jsonl(
        &cfg.out_dir.join("results.jsonl"),
        &[record.to_json_line()?],
    )?;
    println!(
        "accuracy={:.4} on {} samples (silent {}, unlabeled neurons {})",
        record.accuracy, record.test_samples, record.silent_samples, record.unlabeled_neurons
    );
    Ok(())
}

fn sweep(a: SweepArgs) -> CmdResult {
    let cfg = resolve(&a.pipeline)?;
    let axes: Vec<GridAxis> = a
        .grid
        .iter()
        .map(|g| GridAxis::parse(g))
        .collect::<vdsp::Result<_>>()?;
    // Reject unknown keys before any training.
    for axis in &axes {
        let mut probe = cfg.spec.clone();
        experiments::apply_override(&mut probe, &axis.key, axis.values[0])?;
    }
    let seeds = if a.seeds.is_empty() {
        vec![cfg.spec.network.seed]
    } else {
        a.seeds.clone()
    };
    let (train, test) = load_mnist(&cfg)?;
    create_out_dir(&cfg)?;
    let runs = experiments::run_grid(&cfg.spec, &axes, &seeds, cfg.workers, &train, &test)?;

    let mut lines = Vec::with_capacity(runs.len());
    for r in &runs {
        let mut run_cfg = cfg.clone();
        for (k, v) in &r.cell.assignments {
            experiments::apply_override(&mut run_cfg.spec, k, *v)?;
        }
        run_cfg.spec.network.seed = r.seed;
        let mut record = RunRecord::new("sweep", &run_cfg, &r.outcome, r.wall_time_s);
        record.cell = r.cell.assignments.clone();
        lines.push(record.to_json_line()?);
    }
    append_jsonl(&cfg.out_dir.join("results.jsonl"), &lines)?;

    let summary = experiments::aggregate(&runs);
    let keys: Vec<&str> = axes.iter().map(|a| a.key.as_str()).collect();
    let mut text = format!(
        "{},runs,mean_accuracy,std_accuracy,stuck_pot,stuck_dep,stuck_either\n",
        keys.join(",")
    );
    for c in &summary {
        let vals: Vec<String> = keys
            .iter()
            .map(|k| c.cell.get(k).map(|v| v.to_string()).unwrap_or_default())
            .collect();
        let _ = writeln!(
            text,
            "{},{},{},{},{},{},{}",
            vals.join(","),
            c.runs,
            c.mean_accuracy,
            c.std_accuracy,
            c.mean_stuck_pot,
            c.mean_stuck_dep,
            c.mean_stuck_either
        );
    }
    write_atomic(&cfg.out_dir.join("summary.csv"), text.as_bytes())?;

    if runs.iter().any(|r| !r.outcome.checkpoints.is_empty()) {
        let mut curve = format!("{},seed,samples_seen,accuracy\n", keys.join(","));
        for r in &runs {
            let vals: Vec<String> = keys
                .iter()
                .map(|k| r.cell.get(k).map(|v| v.to_string()).unwrap_or_default())
                .collect();
            for c in &r.outcome.checkpoints {
                let _ = writeln!(
                    curve,
                    "{},{},{},{}",
                    vals.join(","),
                    r.seed,
                    c.samples_seen,
                    c.accuracy
                );
            }
        }
        write_atomic(&cfg.out_dir.join("curve.csv"), curve.as_bytes())?;
    }
    print!("{text}");
    Ok(())
}

fn export(a: ExportArgs) -> CmdResult {
    require_file(&a.snapshot)?;
    if a.csv.is_none() && a.pgm.is_none() {
        return Err(Failure::Usage(
            "nothing to export: pass --csv and/or --pgm".into(),
        ));
    }
    let (meta, weights) = snn::read_snapshot(&a.snapshot)?;
    if let Some(path) = &a.csv {
        ensure_parent(path)?;
        snn::write_weights_csv(path, meta.rows, meta.cols, &weights)?;
        println!("wrote {}", path.display());
    }
    if let Some(dir) = &a.pgm {
        let side = (meta.rows as f64).sqrt().round() as usize;
        if side * side != meta.rows {
            return Err(Failure::Usage(format!(
                "{} inputs do not form a square image",
                meta.rows
            )));
        }
        let paths = snn::write_pgm_maps(dir, side, meta.cols, &weights)?;
        println!("wrote {} maps to {}", paths.len(), dir.display());
    }
    Ok(())
}
