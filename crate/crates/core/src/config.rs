//! Run configuration: a flat, sectioned `key = value` text format.
//!
//! ```text
//! # comments start with '#'
//! [device]
//! preset = hzo
//! theta_p = 0.42
//!
//! [network]
//! neurons = 200
//! ```
//!
//! `device.preset` selects the Table-style device values and the matching
//! network defaults; every other key overrides one value on top of that,
//! whatever its position in the file. Command-line overrides use the same
//! `section.key` names and are applied after the file. Unknown keys and bad
//! values are all collected and reported together.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::device::Preset;
use crate::error::{Error, Result};
use crate::experiments::RunSpec;
use crate::neuron::AdaptationMode;
use crate::snn::{InputStart, NetworkConfig};
use crate::Real;

/// Every accepted `(section, key)`, in rendering order.
pub const KEYS: &[(&str, &str)] = &[
    ("device", "preset"),
    ("device", "alpha_p"),
    ("device", "alpha_d"),
    ("device", "theta_p"),
    ("device", "theta_d"),
    ("device", "gamma_p"),
    ("device", "gamma_d"),
    ("device", "hrs_ohm"),
    ("device", "lrs_ohm"),
    ("device", "sf_pd"),
    ("network", "neurons"),
    ("network", "n_inputs"),
    ("network", "synapse_gain"),
    ("network", "t_wta"),
    ("network", "dt"),
    ("network", "input_start"),
    ("input", "tau_mem"),
    ("input", "v_th"),
    ("input", "v_reset"),
    ("input", "v_rest"),
    ("input", "t_ref"),
    ("output", "tau_mem"),
    ("output", "v_th"),
    ("output", "v_reset"),
    ("output", "v_rest"),
    ("output", "t_ref"),
    ("output", "inc_n"),
    ("output", "tau_adap"),
    ("output", "adaptation"),
    ("vdsp", "sf_p"),
    ("vdsp", "v_mid"),
    ("encoding", "i_max"),
    ("encoding", "sigma_noise"),
    ("encoding", "bias_b"),
    ("encoding", "duration"),
    ("variability", "rsd_theta"),
    ("variability", "rsd_hrs"),
    ("variability", "rsd_lrs"),
    ("experiment", "seed"),
    ("experiment", "epochs"),
    ("experiment", "n_train"),
    ("experiment", "n_label"),
    ("experiment", "n_test"),
    ("experiment", "n_checkpoint_test"),
    ("experiment", "checkpoints"),
    ("experiment", "workers"),
    ("io", "mnist_dir"),
    ("io", "out_dir"),
];

/// Fully resolved configuration of one pipeline invocation.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub preset: Preset,
    pub spec: RunSpec<Real>,
    pub workers: usize,
    pub mnist_dir: PathBuf,
    pub out_dir: PathBuf,
}

/// One `section.key = value` assignment and where it came from.
#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub section: String,
    pub key: String,
    pub value: String,
    pub origin: String,
}

impl RunConfig {
    /// Defaults for a preset device: 50 output neurons, one epoch.
    pub fn preset(preset: Preset) -> Self {
        RunConfig {
            preset,
            spec: RunSpec::new(NetworkConfig::mnist(preset, 50)),
            workers: 1,
            mnist_dir: PathBuf::from("data/mnist"),
            out_dir: PathBuf::from("out"),
        }
    }

    /// Resolve file contents plus overrides into a validated config.
    pub fn resolve(assignments: &[Assignment]) -> Result<Self> {
        let mut errors = Vec::new();
        let mut preset = Preset::TiO2;
        for a in assignments
            .iter()
            .filter(|a| a.section == "device" && a.key == "preset")
        {
            match a.value.parse() {
                Ok(p) => preset = p,
                Err(e) => errors.push(format!("{}: device.preset: {e}", a.origin)),
            }
        }
        let mut cfg = RunConfig::preset(preset);
        for a in assignments {
            if a.section == "device" && a.key == "preset" {
                continue;
            }
            if let Err(e) = cfg.set(&a.section, &a.key, &a.value) {
                errors.push(format!("{}: {}.{}: {e}", a.origin, a.section, a.key));
            }
        }
        if errors.is_empty() {
            if let Err(e) = cfg.validate() {
                errors.push(e.to_string());
            }
        }
        if errors.is_empty() {
            Ok(cfg)
        } else {
            Err(Error::Config(errors.join("\n")))
        }
    }

    pub fn from_text(text: &str, origin: &str, overrides: &[Assignment]) -> Result<Self> {
        let mut all = parse(text, origin)?;
        all.extend_from_slice(overrides);
        Self::resolve(&all)
    }

    pub fn from_file(path: &Path, overrides: &[Assignment]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text, &path.display().to_string(), overrides)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.resolved_network().validate()?;
        self.spec.presentation.encoding.validate()?;
        self.spec.train.validate()?;
        if !(self.spec.presentation.duration >= self.spec.network.dt) {
            return Err(Error::validation(
                "encoding.duration",
                "must be at least one dt",
            ));
        }
        if self.workers == 0 {
            return Err(Error::validation("experiment.workers", "must be >= 1"));
        }
        Ok(())
    }

    fn set(&mut self, section: &str, key: &str, value: &str) -> Result<()> {
        let spec = &mut self.spec;
        let net = &mut spec.network;
        let num = || -> Result<Real> {
            value
                .parse::<Real>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::Input(format!("`{value}` is not a finite number")))
        };
        let count = || -> Result<usize> {
            value
                .parse::<usize>()
                .map_err(|_| Error::Input(format!("`{value}` is not a non-negative integer")))
        };
        let optional = || -> Result<Option<usize>> {
            if value.eq_ignore_ascii_case("all") {
                Ok(None)
            } else {
                count().map(Some)
            }
        };
        match (section, key) {
            ("device", "sf_pd") => {
                net.device.sf_pd = num()?;
                net.vdsp.sf_pd = net.device.sf_pd;
            }
            ("device", k) if crate::device::DeviceParams::<Real>::KEYS.contains(&k) => {
                net.device.set(k, num()?)?
            }
            ("network", "neurons") => net.n_outputs = count()?,
            ("network", "n_inputs") => net.n_inputs = count()?,
            ("network", "synapse_gain") => net.synapse_gain = num()?,
            ("network", "t_wta") => net.t_wta = num()?,
            ("network", "dt") => net.dt = num()?,
            ("network", "input_start") => net.input_start = value.parse::<InputStart>()?,
            ("input", "tau_mem") => net.input.tau_mem = num()?,
            ("input", "v_th") => net.input.v_th = num()?,
            ("input", "v_reset") => net.input.v_reset = num()?,
            ("input", "v_rest") => net.input.v_rest = num()?,
            ("input", "t_ref") => net.input.t_ref = num()?,
            ("output", "tau_mem") => net.output.lif.tau_mem = num()?,
            ("output", "v_th") => net.output.lif.v_th = num()?,
            ("output", "v_reset") => net.output.lif.v_reset = num()?,
            ("output", "v_rest") => net.output.lif.v_rest = num()?,
            ("output", "t_ref") => net.output.lif.t_ref = num()?,
            ("output", "inc_n") => net.output.inc_n = num()?,
            ("output", "tau_adap") => net.output.tau_adap = num()?,
            ("output", "adaptation") => net.output.mode = value.parse::<AdaptationMode>()?,
            ("vdsp", "sf_p") => net.vdsp.sf_p = num()?,
            ("vdsp", "v_mid") => net.vdsp.v_mid = num()?,
            ("encoding", "i_max") => spec.presentation.encoding.i_max = num()?,
            ("encoding", "sigma_noise") => spec.presentation.encoding.sigma_noise = num()?,
            ("encoding", "bias_b") => spec.presentation.encoding.bias_b = num()?,
            ("encoding", "duration") => spec.presentation.duration = num()?,
            ("variability", "rsd_theta") => net.variability.rsd_theta = num()?,
            ("variability", "rsd_hrs") => net.variability.rsd_hrs = num()?,
            ("variability", "rsd_lrs") => net.variability.rsd_lrs = num()?,
            ("experiment", "seed") => {
                net.seed = value
                    .parse()
                    .map_err(|_| Error::Input(format!("`{value}` is not a u64 seed")))?
            }
            ("experiment", "epochs") => spec.train.epochs = count()?,
            ("experiment", "n_train") => spec.train.n_train_samples = optional()?,
            ("experiment", "n_label") => spec.n_label = count()?,
            ("experiment", "n_test") => spec.n_test = optional()?,
            ("experiment", "n_checkpoint_test") => spec.n_checkpoint_test = count()?,
            ("experiment", "checkpoints") => {
                spec.train.checkpoints = if value.trim().is_empty() {
                    Vec::new()
                } else {
                    value
                        .split(',')
                        .map(|s| {
                            s.trim().parse::<u64>().map_err(|_| {
                                Error::Input(format!("checkpoint `{s}` is not an integer"))
                            })
                        })
                        .collect::<Result<_>>()?
                }
            }
            ("experiment", "workers") => self.workers = count()?,
            ("io", "mnist_dir") => self.mnist_dir = PathBuf::from(value),
            ("io", "out_dir") => self.out_dir = PathBuf::from(value),
            _ => return Err(Error::Config("unknown key".into())),
        }
        Ok(())
    }

    fn value(&self, section: &str, key: &str) -> String {
        let spec = &self.spec;
        let net = &spec.network;
        let opt = |v: Option<usize>| v.map_or_else(|| "all".to_string(), |n| n.to_string());
        match (section, key) {
            ("device", "preset") => self.preset.name().to_string(),
            ("device", "sf_pd") => net.vdsp.sf_pd.to_string(),
            ("device", k) => {
                let i = crate::device::DeviceParams::<Real>::KEYS
                    .iter()
                    .position(|x| *x == k)
                    .expect("device key");
                net.device.values()[i].to_string()
            }
            ("network", "neurons") => net.n_outputs.to_string(),
            ("network", "n_inputs") => net.n_inputs.to_string(),
            ("network", "synapse_gain") => net.synapse_gain.to_string(),
            ("network", "t_wta") => net.t_wta.to_string(),
            ("network", "dt") => net.dt.to_string(),
            ("network", "input_start") => net.input_start.name().to_string(),
            ("input", "tau_mem") => net.input.tau_mem.to_string(),
            ("input", "v_th") => net.input.v_th.to_string(),
            ("input", "v_reset") => net.input.v_reset.to_string(),
            ("input", "v_rest") => net.input.v_rest.to_string(),
            ("input", "t_ref") => net.input.t_ref.to_string(),
            ("output", "tau_mem") => net.output.lif.tau_mem.to_string(),
            ("output", "v_th") => net.output.lif.v_th.to_string(),
            ("output", "v_reset") => net.output.lif.v_reset.to_string(),
            ("output", "v_rest") => net.output.lif.v_rest.to_string(),
            ("output", "t_ref") => net.output.lif.t_ref.to_string(),
            ("output", "inc_n") => net.output.inc_n.to_string(),
            ("output", "tau_adap") => net.output.tau_adap.to_string(),
            ("output", "adaptation") => net.output.mode.name().to_string(),
            ("vdsp", "sf_p") => net.vdsp.sf_p.to_string(),
            ("vdsp", "v_mid") => net.vdsp.v_mid.to_string(),
            ("encoding", "i_max") => spec.presentation.encoding.i_max.to_string(),
            ("encoding", "sigma_noise") => spec.presentation.encoding.sigma_noise.to_string(),
            ("encoding", "bias_b") => spec.presentation.encoding.bias_b.to_string(),
            ("encoding", "duration") => spec.presentation.duration.to_string(),
            ("variability", "rsd_theta") => net.variability.rsd_theta.to_string(),
            ("variability", "rsd_hrs") => net.variability.rsd_hrs.to_string(),
            ("variability", "rsd_lrs") => net.variability.rsd_lrs.to_string(),
            ("experiment", "seed") => net.seed.to_string(),
            ("experiment", "epochs") => spec.train.epochs.to_string(),
            ("experiment", "n_train") => opt(spec.train.n_train_samples),
            ("experiment", "n_label") => spec.n_label.to_string(),
            ("experiment", "n_test") => opt(spec.n_test),
            ("experiment", "n_checkpoint_test") => spec.n_checkpoint_test.to_string(),
            ("experiment", "checkpoints") => spec
                .train
                .checkpoints
                .iter()
                .map(|c| c.to_string())
                .collect::<Vec<_>>()
                .join(","),
            ("experiment", "workers") => self.workers.to_string(),
            ("io", "mnist_dir") => self.mnist_dir.display().to_string(),
            ("io", "out_dir") => self.out_dir.display().to_string(),
            _ => unreachable!("key table out of sync: {section}.{key}"),
        }
    }

    /// Canonical text form; parsing it back gives the same config.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let mut current = "";
        for &(section, key) in KEYS {
            if section != current {
                if !current.is_empty() {
                    out.push('\n');
                }
                let _ = writeln!(out, "[{section}]");
                current = section;
            }
            let _ = writeln!(out, "{key} = {}", self.value(section, key));
        }
        out
    }

    /// `section.key -> value` pairs of the canonical form.
    pub fn entries(&self) -> Vec<(String, String)> {
        KEYS.iter()
            .map(|&(s, k)| (format!("{s}.{k}"), self.value(s, k)))
            .collect()
    }

    /// SHA-256 of [`RunConfig::render`], hex encoded.
    pub fn content_hash(&self) -> String {
        let digest = Sha256::digest(self.render().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Resolved config as a JSON object keyed by section.
    pub fn to_json(&self) -> serde_json::Value {
        let mut root = serde_json::Map::new();
        for &(section, key) in KEYS {
            let entry = root
                .entry(section.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default()));
            if let serde_json::Value::Object(m) = entry {
                m.insert(
                    key.to_string(),
                    serde_json::Value::String(self.value(section, key)),
                );
            }
        }
        serde_json::Value::Object(root)
    }
}

/// Split config text into assignments. Syntax errors (not unknown keys,
/// which [`RunConfig::resolve`] reports) are collected across the file.
pub fn parse(text: &str, origin: &str) -> Result<Vec<Assignment>> {
    let mut out = Vec::new();
    let mut errors = Vec::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        let at = format!("{origin}:{}", i + 1);
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            match name.strip_suffix(']') {
                Some(name) if !name.trim().is_empty() => section = name.trim().to_string(),
                _ => errors.push(format!("{at}: malformed section header `{line}`")),
            }
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(format!("{at}: expected `key = value`, got `{line}`"));
            continue;
        };
        let key = key.trim();
        if section.is_empty() {
            errors.push(format!("{at}: `{key}` appears before any [section]"));
            continue;
        }
        if !KEYS.contains(&(section.as_str(), key)) {
            errors.push(format!("{at}: unknown key `{section}.{key}`"));
            continue;
        }
        out.push(Assignment {
            section: section.clone(),
            key: key.to_string(),
            value: value.trim().to_string(),
            origin: at,
        });
    }
    if errors.is_empty() {
        Ok(out)
    } else {
        Err(Error::Config(errors.join("\n")))
    }
}

/// Parse a command-line override `section.key=value`. A bare `key` is
/// accepted when exactly one section has it.
pub fn parse_override(s: &str) -> Result<Assignment> {
    let (name, value) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not key=value")))?;
    let name = name.trim();
    let (section, key) = match name.split_once('.') {
        Some((sec, key)) => (sec.to_string(), key.to_string()),
        None => {
            let hits: Vec<&(&str, &str)> = KEYS.iter().filter(|(_, k)| *k == name).collect();
            match hits.as_slice() {
                [(sec, key)] => (sec.to_string(), key.to_string()),
                [] => return Err(Error::Config(format!("unknown key `{name}`"))),
                many => {
                    let options: Vec<String> =
                        many.iter().map(|(sec, k)| format!("{sec}.{k}")).collect();
                    return Err(Error::Config(format!(
                        "`{name}` is ambiguous; use one of {}",
                        options.join(", ")
                    )));
                }
            }
        }
    };
    if !KEYS.contains(&(section.as_str(), key.as_str())) {
        return Err(Error::Config(format!("unknown key `{section}.{key}`")));
    }
    Ok(Assignment {
        section,
        key,
        value: value.trim().to_string(),
        origin: "command line".into(),
    })
}

/// Compact summary stored alongside results.
#[derive(Debug, Clone, Serialize)]
pub struct ConfigStamp {
    pub hash: String,
    pub config: serde_json::Value,
}

impl From<&RunConfig> for ConfigStamp {
    fn from(cfg: &RunConfig) -> Self {
        ConfigStamp {
            hash: cfg.content_hash(),
            config: cfg.to_json(),
        }
    }
}
