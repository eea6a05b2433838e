//! Weight snapshots.
//!
//! A snapshot is a text descriptor of `key = value` lines plus a sidecar
//! binary file holding the `rows × cols` weights (presynaptic-major) as
//! 32-bit little-endian floats:
//!
//! ```text
//! format = vdsp-weights-v1
//! rows = 784
//! cols = 50
//! device = tio2
//! seed = 7
//! samples = 60000
//! data = weights.bin
//! ```

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::scalar::Scalar;

pub const FORMAT: &str = "vdsp-weights-v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SnapshotMeta {
    pub rows: usize,
    pub cols: usize,
    pub device: String,
    pub seed: u64,
    pub samples: u64,
}

fn sidecar_for(descriptor: &Path) -> PathBuf {
    descriptor.with_extension("bin")
}

/// Write descriptor and sidecar. Returns the sidecar path.
pub fn write_snapshot<T: Scalar>(
    descriptor: &Path,
    meta: &SnapshotMeta,
    weights: &[T],
) -> Result<PathBuf> {
    if weights.len() != meta.rows * meta.cols {
        return Err(Error::Input(format!(
            "{} weights do not fill {}x{}",
            weights.len(),
            meta.rows,
            meta.cols
        )));
    }
    let sidecar = sidecar_for(descriptor);
    let mut bytes = Vec::with_capacity(weights.len() * 4);
    for w in weights {
        bytes.extend_from_slice(&(w.to_f64_lossy() as f32).to_le_bytes());
    }
    write_atomic(&sidecar, &bytes)?;
    let mut text = String::new();
    let _ = writeln!(text, "format = {FORMAT}");
    let _ = writeln!(text, "rows = {}", meta.rows);
    let _ = writeln!(text, "cols = {}", meta.cols);
    let _ = writeln!(text, "device = {}", meta.device);
    let _ = writeln!(text, "seed = {}", meta.seed);
    let _ = writeln!(text, "samples = {}", meta.samples);
    let _ = writeln!(
        text,
        "data = {}",
        sidecar
            .file_name()
            .map(|s| s.to_string_lossy())
            .unwrap_or_default()
    );
    write_atomic(descriptor, text.as_bytes())?;
    Ok(sidecar)
}

pub fn read_snapshot(descriptor: &Path) -> Result<(SnapshotMeta, Vec<f32>)> {
    let text = std::fs::read_to_string(descriptor).map_err(|e| Error::io(descriptor, e))?;
    let mut fields = std::collections::BTreeMap::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
            path: descriptor.display().to_string(),
            line: n + 1,
            msg: "expected `key = value`".into(),
        })?;
        fields.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get = |k: &str| {
        fields
            .get(k)
            .cloned()
            .ok_or_else(|| Error::Format(format!("snapshot descriptor missing `{k}`")))
    };
    let num = |k: &str| -> Result<u64> {
        get(k)?
            .parse()
            .map_err(|_| Error::Format(format!("snapshot field `{k}` is not an integer")))
    };
    if get("format")? != FORMAT {
        return Err(Error::Format(format!(
            "unsupported snapshot format, expected {FORMAT}"
        )));
    }
    let meta = SnapshotMeta {
        rows: num("rows")? as usize,
        cols: num("cols")? as usize,
        device: get("device")?,
        seed: num("seed")?,
        samples: num("samples")?,
    };
    let data = descriptor
        .parent()
        .unwrap_or(Path::new("."))
        .join(get("data")?);
    let bytes = std::fs::read(&data).map_err(|e| Error::io(&data, e))?;
    let want = meta.rows * meta.cols * 4;
    if bytes.len() != want {
        return Err(Error::Length(format!(
            "{}: expected {want} bytes, found {}",
            data.display(),
            bytes.len()
        )));
    }
    let weights = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok((meta, weights))
}

/// Weights as CSV: one row per presynaptic neuron, one column per output.
pub fn write_weights_csv<T: Scalar>(
    path: &Path,
    rows: usize,
    cols: usize,
    weights: &[T],
) -> Result<()> {
    let mut text = String::new();
    let header: Vec<String> = (0..cols).map(|k| format!("out{k}")).collect();
    let _ = writeln!(text, "pre,{}", header.join(","));
    for j in 0..rows {
        let _ = write!(text, "{j}");
        for k in 0..cols {
            let _ = write!(text, ",{}", weights[j * cols + k].to_f64_lossy() as f32);
        }
        text.push('\n');
    }
    write_atomic(path, text.as_bytes())
}

/// One ASCII PGM (P2) image per output neuron, `side × side` pixels,
/// weight 1 mapped to 255. Returns the written paths.
pub fn write_pgm_maps<T: Scalar>(
    dir: &Path,
    side: usize,
    cols: usize,
    weights: &[T],
) -> Result<Vec<PathBuf>> {
    if weights.len() != side * side * cols {
        return Err(Error::Input(format!(
            "{} weights do not form {cols} maps of {side}x{side}",
            weights.len()
        )));
    }
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths = Vec::with_capacity(cols);
    for k in 0..cols {
        let mut text = format!("P2\n{side} {side}\n255\n");
        for r in 0..side {
            let row: Vec<String> = (0..side)
                .map(|c| {
                    let w = weights[(r * side + c) * cols + k].to_f64_lossy();
                    ((w.clamp(0.0, 1.0) * 255.0).round() as u8).to_string()
                })
                .collect();
            text.push_str(&row.join(" "));
            text.push('\n');
        }
        let path = dir.join(format!("neuron_{k:03}.pgm"));
        write_atomic(&path, text.as_bytes())?;
        paths.push(path);
    }
    Ok(paths)
}
