//! MNIST IDX reading and writing.
//!
//! Files are big-endian: a 32-bit magic (`0x00000803` images, `0x00000801`
//! labels), then 32-bit dimensions, then the unsigned-byte payload. Gzipped
//! files are detected by their header and inflated transparently.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;

use crate::error::{Error, Result};

pub const IMAGE_MAGIC: u32 = 2051;
pub const LABEL_MAGIC: u32 = 2049;
pub const PIXELS: usize = 28 * 28;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub rows: usize,
    pub cols: usize,
    /// Row-major pixels, `len() * rows * cols` bytes.
    pub images: Vec<u8>,
    pub labels: Vec<u8>,
}

impl Dataset {
    pub fn new(rows: usize, cols: usize, images: Vec<u8>, labels: Vec<u8>) -> Result<Self> {
        let size = rows * cols;
        if size == 0 || images.len() != labels.len() * size {
            return Err(Error::Consistency(format!(
                "{} image bytes do not match {} labels of {rows}x{cols}",
                images.len(),
                labels.len()
            )));
        }
        if let Some(bad) = labels.iter().find(|&&l| l > 9) {
            return Err(Error::validation(
                "labels",
                format!("label {bad} outside 0..=9"),
            ));
        }
        Ok(Dataset {
            rows,
            cols,
            images,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn pixels(&self) -> usize {
        self.rows * self.cols
    }

    pub fn image(&self, i: usize) -> &[u8] {
        let n = self.pixels();
        &self.images[i * n..(i + 1) * n]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    /// Copy of samples `start..end`.
    pub fn slice(&self, start: usize, end: usize) -> Dataset {
        let n = self.pixels();
        let end = end.min(self.len());
        let start = start.min(end);
        Dataset {
            rows: self.rows,
            cols: self.cols,
            images: self.images[start * n..end * n].to_vec(),
            labels: self.labels[start..end].to_vec(),
        }
    }

    pub fn head(&self, count: usize) -> Dataset {
        self.slice(0, count)
    }

    /// The last `count` samples (all of them if fewer).
    pub fn tail(&self, count: usize) -> Dataset {
        self.slice(self.len().saturating_sub(count), self.len())
    }
}

fn read_all(path: &Path) -> Result<Vec<u8>> {
    let mut raw = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut raw))
        .map_err(|e| Error::io(path, e))?;
    if raw.starts_with(&[0x1f, 0x8b]) {
        let mut out = Vec::new();
        GzDecoder::new(raw.as_slice())
            .read_to_end(&mut out)
            .map_err(|e| Error::io(path, e))?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn be_u32(bytes: &[u8], at: usize, what: &str) -> Result<u32> {
    bytes
        .get(at..at + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::Length(format!("{what}: header ends before byte {}", at + 4)))
}

/// Parse an IDX image file body: `(count, rows, cols, pixels)`.
pub fn parse_images(bytes: &[u8]) -> Result<(usize, usize, usize, Vec<u8>)> {
    let magic = be_u32(bytes, 0, "images")?;
    if magic != IMAGE_MAGIC {
        return Err(Error::Format(format!(
            "images: magic {magic:#010x}, expected {IMAGE_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4, "images")? as usize;
    let rows = be_u32(bytes, 8, "images")? as usize;
    let cols = be_u32(bytes, 12, "images")? as usize;
    let want = n * rows * cols;
    let payload = &bytes[16..];
    if payload.len() < want {
        return Err(Error::Length(format!(
            "images: header promises {want} bytes, file has {}",
            payload.len()
        )));
    }
    Ok((n, rows, cols, payload[..want].to_vec()))
}

pub fn parse_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = be_u32(bytes, 0, "labels")?;
    if magic != LABEL_MAGIC {
        return Err(Error::Format(format!(
            "labels: magic {magic:#010x}, expected {LABEL_MAGIC:#010x}"
        )));
    }
    let n = be_u32(bytes, 4, "labels")? as usize;
    let payload = &bytes[8..];
    if payload.len() < n {
        return Err(Error::Length(format!(
            "labels: header promises {n} bytes, file has {}",
            payload.len()
        )));
    }
    Ok(payload[..n].to_vec())
}

pub fn load_mnist_idx(
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<Dataset> {
    let (n, rows, cols, images) = parse_images(&read_all(images_path.as_ref())?)?;
    let labels = parse_labels(&read_all(labels_path.as_ref())?)?;
    if labels.len() != n {
        return Err(Error::Consistency(format!(
            "{} images but {} labels",
            n,
            labels.len()
        )));
    }
    Dataset::new(rows, cols, images, labels)
}

pub fn encode_images(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + ds.images.len());
    for v in [IMAGE_MAGIC, ds.len() as u32, ds.rows as u32, ds.cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(&ds.images);
    out
}

pub fn encode_labels(ds: &Dataset) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + ds.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(ds.len() as u32).to_be_bytes());
    out.extend_from_slice(&ds.labels);
    out
}

pub fn save_mnist_idx(
    ds: &Dataset,
    images_path: impl AsRef<Path>,
    labels_path: impl AsRef<Path>,
) -> Result<()> {
    for (path, bytes) in [
        (images_path.as_ref(), encode_images(ds)),
        (labels_path.as_ref(), encode_labels(ds)),
    ] {
        File::create(path)
            .and_then(|mut f| f.write_all(&bytes))
            .map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Standard MNIST file names inside a directory, plain or `.gz`.
pub fn locate(dir: &Path, split: Split) -> Option<(std::path::PathBuf, std::path::PathBuf)> {
    let (img, lbl) = match split {
        Split::Train => ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
        Split::Test => ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
    };
    for suffix in ["", ".gz"] {
        let i = dir.join(format!("{img}{suffix}"));
        let l = dir.join(format!("{lbl}{suffix}"));
        if i.is_file() && l.is_file() {
            return Some((i, l));
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Dataset {
        let images = (0..3 * 4).map(|i| (i * 20) as u8).collect();
        Dataset::new(2, 2, images, vec![1, 7, 3]).unwrap()
    }

    #[test]
    fn round_trip_bytes() {
        let ds = tiny();
        let (n, r, c, px) = parse_images(&encode_images(&ds)).unwrap();
        assert_eq!((n, r, c), (3, 2, 2));
        assert_eq!(px, ds.images);
        assert_eq!(parse_labels(&encode_labels(&ds)).unwrap(), ds.labels);
    }

    #[test]
    fn image_magic_bytes() {
        let bytes = encode_images(&tiny());
        assert_eq!(&bytes[..4], &[0x00, 0x00, 0x08, 0x03]);
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_images(&tiny());
        bytes[3] = 0x01;
        assert!(matches!(parse_images(&bytes), Err(Error::Format(_))));
        assert!(matches!(
            parse_labels(&encode_images(&tiny())),
            Err(Error::Format(_))
        ));
    }

    #[test]
    fn truncated_payload() {
        let bytes = encode_images(&tiny());
        assert!(matches!(
            parse_images(&bytes[..bytes.len() - 1]),
            Err(Error::Length(_))
        ));
        assert!(matches!(parse_images(&bytes[..10]), Err(Error::Length(_))));
        let labels = encode_labels(&tiny());
        assert!(matches!(parse_labels(&labels[..9]), Err(Error::Length(_))));
    }

    #[test]
    fn slicing() {
        let ds = tiny();
        assert_eq!(ds.tail(2).labels, vec![7, 3]);
        assert_eq!(ds.tail(10).len(), 3);
        assert_eq!(ds.head(1).image(0), &[0, 20, 40, 60]);
    }
}
