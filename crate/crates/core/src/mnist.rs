//! MNIST IDX parsing, normalization, and deterministic minibatch serving.
//!
//! Accepts the four standard files raw or gzipped (sniffed by magic):
//! train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte,
//! t10k-labels-idx1-ubyte.

use crate::error::{Error, Result};
use crate::numerics::Matrix;
use crate::rng::SeededRng;
use flate2::read::GzDecoder;
use std::io::Read;
use std::path::{Path, PathBuf};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

pub const TRAIN_IMAGES: &str = "train-images-idx3-ubyte";
pub const TRAIN_LABELS: &str = "train-labels-idx1-ubyte";
pub const TEST_IMAGES: &str = "t10k-images-idx3-ubyte";
pub const TEST_LABELS: &str = "t10k-labels-idx1-ubyte";

/// Parsed image payload, still in raw bytes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImages {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    /// `count * rows * cols` bytes, row-major per image.
    pub pixels: Vec<u8>,
}

fn read_be_u32(bytes: &[u8], offset: usize) -> Result<u32> {
    let end = offset + 4;
    if bytes.len() < end {
        return Err(Error::IdxLength {
            expected: end,
            found: bytes.len(),
        });
    }
    Ok(u32::from_be_bytes(bytes[offset..end].try_into().unwrap()))
}

/// Parses an IDX image container (big-endian magic 0x00000803, then count,
/// rows, cols, then the pixel bytes).
pub fn parse_idx_images(bytes: &[u8]) -> Result<RawImages> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != IMAGES_MAGIC {
        let hint = if magic == LABELS_MAGIC {
            "labels file given for images"
        } else {
            "not an IDX image file"
        };
        return Err(Error::IdxMagic {
            expected: IMAGES_MAGIC,
            found: magic,
            hint,
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let rows = read_be_u32(bytes, 8)? as usize;
    let cols = read_be_u32(bytes, 12)? as usize;
    let expected = 16 + count * rows * cols;
    if bytes.len() != expected {
        return Err(Error::IdxLength {
            expected,
            found: bytes.len(),
        });
    }
    Ok(RawImages {
        count,
        rows,
        cols,
        pixels: bytes[16..].to_vec(),
    })
}

/// Parses an IDX label container (magic 0x00000801); every label must be
/// in 0..=9.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<u8>> {
    let magic = read_be_u32(bytes, 0)?;
    if magic != LABELS_MAGIC {
        let hint = if magic == IMAGES_MAGIC {
            "images file given for labels"
        } else {
            "not an IDX label file"
        };
        return Err(Error::IdxMagic {
            expected: LABELS_MAGIC,
            found: magic,
            hint,
        });
    }
    let count = read_be_u32(bytes, 4)? as usize;
    let expected = 8 + count;
    if bytes.len() != expected {
        return Err(Error::IdxLength {
            expected,
            found: bytes.len(),
        });
    }
    let labels = bytes[8..].to_vec();
    for (index, &value) in labels.iter().enumerate() {
        if value > 9 {
            return Err(Error::LabelOutOfRange { index, value });
        }
    }
    Ok(labels)
}

/// Images scaled to [0, 1], labels one-hot encoded.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// `n x (rows * cols)`, entries in [0, 1].
    pub images: Matrix,
    pub labels: Vec<u8>,
    /// `n x 10`, each row a unit vector.
    pub one_hot: Matrix,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// First `n` samples, for quick experiments.
    pub fn subset(&self, n: usize) -> Dataset {
        let n = n.min(self.len());
        Dataset {
            images: self.images.slice_rows(0, n),
            labels: self.labels[..n].to_vec(),
            one_hot: self.one_hot.slice_rows(0, n),
        }
    }
}

/// Pixel bytes to [0, 1] reals (divide by 255), labels to unit vectors.
pub fn normalize_and_encode(raw: &RawImages, labels: &[u8]) -> Result<Dataset> {
    if raw.count != labels.len() {
        return Err(Error::CountMismatch {
            images: raw.count,
            labels: labels.len(),
        });
    }
    let width = raw.rows * raw.cols;
    let data: Vec<f64> = raw.pixels.iter().map(|&p| p as f64 / 255.0).collect();
    let images = Matrix::from_vec(raw.count, width, data)?;
    let mut one_hot = Matrix::zeros(raw.count, 10);
    for (i, &label) in labels.iter().enumerate() {
        one_hot.set(i, label as usize, 1.0);
    }
    Ok(Dataset {
        images,
        labels: labels.to_vec(),
        one_hot,
    })
}

/// One epoch worth of minibatches: a fresh permutation of all samples,
/// partitioned in order; the last batch may be short. Deterministic for a
/// given RNG state.
pub struct Minibatches<'a> {
    dataset: &'a Dataset,
    order: Vec<usize>,
    batch_size: usize,
    pos: usize,
}

pub fn minibatch_iterator<'a>(
    dataset: &'a Dataset,
    batch_size: usize,
    rng: &mut SeededRng,
) -> Minibatches<'a> {
    assert!(batch_size >= 1, "batch_size must be >= 1");
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    rng.shuffle(&mut order);
    Minibatches {
        dataset,
        order,
        batch_size,
        pos: 0,
    }
}

/// Inputs, one-hot targets, and labels for one minibatch.
pub struct Batch {
    pub inputs: Matrix,
    pub targets: Matrix,
    pub labels: Vec<u8>,
}

impl<'a> Iterator for Minibatches<'a> {
    type Item = Batch;

    fn next(&mut self) -> Option<Batch> {
        if self.pos >= self.order.len() {
            return None;
        }
        let end = (self.pos + self.batch_size).min(self.order.len());
        let idx = &self.order[self.pos..end];
        self.pos = end;
        let width = self.dataset.images.cols();
        let mut inputs = Matrix::zeros(idx.len(), width);
        let mut targets = Matrix::zeros(idx.len(), self.dataset.one_hot.cols());
        let mut labels = Vec::with_capacity(idx.len());
        for (r, &i) in idx.iter().enumerate() {
            inputs
                .row_mut(r)
                .copy_from_slice(self.dataset.images.row(i));
            targets
                .row_mut(r)
                .copy_from_slice(self.dataset.one_hot.row(i));
            labels.push(self.dataset.labels[i]);
        }
        Some(Batch {
            inputs,
            targets,
            labels,
        })
    }
}

fn read_maybe_gz(path: &Path) -> Result<Vec<u8>> {
    let raw = std::fs::read(path)?;
    if raw.len() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b {
        let mut out = Vec::new();
        GzDecoder::new(&raw[..]).read_to_end(&mut out)?;
        Ok(out)
    } else {
        Ok(raw)
    }
}

fn find_file(dir: &Path, name: &str) -> Option<PathBuf> {
    let plain = dir.join(name);
    if plain.is_file() {
        return Some(plain);
    }
    let gz = dir.join(format!("{name}.gz"));
    if gz.is_file() {
        return Some(gz);
    }
    None
}

fn load_split(dir: &Path, images_name: &str, labels_name: &str) -> Result<Dataset> {
    let missing: Vec<String> = [images_name, labels_name]
        .iter()
        .filter(|n| find_file(dir, n).is_none())
        .map(|n| n.to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingData {
            dir: dir.display().to_string(),
            missing,
        });
    }
    let raw = parse_idx_images(&read_maybe_gz(&find_file(dir, images_name).unwrap())?)?;
    let labels = parse_idx_labels(&read_maybe_gz(&find_file(dir, labels_name).unwrap())?)?;
    normalize_and_encode(&raw, &labels)
}

/// Loads the four standard MNIST files (raw or .gz) from `dir`.
pub fn load_dataset(dir: &Path) -> Result<(Dataset, Dataset)> {
    let train = load_split(dir, TRAIN_IMAGES, TRAIN_LABELS)?;
    let test = load_split(dir, TEST_IMAGES, TEST_LABELS)?;
    Ok((train, test))
}

fn dir_has_all_files(dir: &Path) -> bool {
    [TRAIN_IMAGES, TRAIN_LABELS, TEST_IMAGES, TEST_LABELS]
        .iter()
        .all(|name| find_file(dir, name).is_some())
}

/// Picks the dataset directory: an explicit path wins, then the
/// `MNIST_DATA_DIR` environment variable, then the nearest `data/`
/// directory walking up from the working directory. Falls back to `data`
/// (the loader will then report what is missing).
pub fn resolve_data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Ok(env_dir) = std::env::var("MNIST_DATA_DIR") {
        if !env_dir.is_empty() {
            return PathBuf::from(env_dir);
        }
    }
    if let Ok(mut dir) = std::env::current_dir() {
        loop {
            let candidate = dir.join("data");
            if dir_has_all_files(&candidate) {
                return candidate;
            }
            if !dir.pop() {
                break;
            }
        }
    }
    PathBuf::from("data")
}
