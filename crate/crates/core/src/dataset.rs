//! Labelled image data: MNIST IDX ingestion and a synthetic stand-in.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::rng::{Stream, Streams};
use crate::{Error, Result};

const IMAGES_MAGIC: u32 = 0x0000_0803;
const LABELS_MAGIC: u32 = 0x0000_0801;

/// Row-major feature matrix with features scaled to [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f32>,
    labels: Vec<u8>,
    dim: usize,
    classes: usize,
}

impl Dataset {
    pub fn new(features: Vec<f32>, labels: Vec<u8>, dim: usize, classes: usize) -> Result<Self> {
        if dim == 0 || classes < 2 {
            return Err(Error::invalid("a dataset needs at least one feature and two classes"));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::invalid(format!(
                "{} feature values for {} examples of dimension {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l as usize >= classes) {
            return Err(Error::invalid(format!("label {bad} outside {classes} classes")));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("dataset features".into()));
        }
        Ok(Self { features, labels, dim, classes })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn example(&self, i: usize) -> &[f32] {
        &self.features[i * self.dim..(i + 1) * self.dim]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    /// Copies the given rows into a new dataset.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut features = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            features.extend_from_slice(self.example(i));
        }
        Self {
            features,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    /// The first `n` examples (or all of them).
    pub fn head(&self, n: usize) -> Self {
        let n = n.min(self.len());
        Self {
            features: self.features[..n * self.dim].to_vec(),
            labels: self.labels[..n].to_vec(),
            dim: self.dim,
            classes: self.classes,
        }
    }
}

fn idx_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Idx { path: path.to_path_buf(), reason: reason.into() }
}

fn be_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes(bytes[at..at + 4].try_into().unwrap())
}

/// Parses an IDX3 image file into `(count, rows, cols, pixels)`.
pub fn read_idx_images(path: &Path) -> Result<(usize, usize, usize, Vec<u8>)> {
    let bytes = fs::read(path)?;
    if bytes.len() < 16 {
        return Err(idx_err(path, "truncated header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != IMAGES_MAGIC {
        return Err(idx_err(path, format!("magic {magic:#010x}, expected {IMAGES_MAGIC:#010x}")));
    }
    let (n, rows, cols) = (be_u32(&bytes, 4) as usize, be_u32(&bytes, 8) as usize, be_u32(&bytes, 12) as usize);
    let want = n * rows * cols;
    if bytes.len() - 16 != want {
        return Err(idx_err(path, format!("{} pixel bytes, header promises {want}", bytes.len() - 16)));
    }
    Ok((n, rows, cols, bytes[16..].to_vec()))
}

/// Parses an IDX1 label file.
pub fn read_idx_labels(path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path)?;
    if bytes.len() < 8 {
        return Err(idx_err(path, "truncated header"));
    }
    let magic = be_u32(&bytes, 0);
    if magic != LABELS_MAGIC {
        return Err(idx_err(path, format!("magic {magic:#010x}, expected {LABELS_MAGIC:#010x}")));
    }
    let n = be_u32(&bytes, 4) as usize;
    if bytes.len() - 8 != n {
        return Err(idx_err(path, format!("{} label bytes, header promises {n}", bytes.len() - 8)));
    }
    Ok(bytes[8..].to_vec())
}

pub fn write_idx_images(path: &Path, rows: usize, cols: usize, pixels: &[u8]) -> Result<()> {
    let n = pixels.len() / (rows * cols);
    let mut out = Vec::with_capacity(16 + pixels.len());
    for v in [IMAGES_MAGIC, n as u32, rows as u32, cols as u32] {
        out.extend_from_slice(&v.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    fs::write(path, out)?;
    Ok(())
}

pub fn write_idx_labels(path: &Path, labels: &[u8]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    fs::write(path, out)?;
    Ok(())
}

/// Loads an MNIST image/label pair, scaling pixels to [0, 1].
pub fn load_mnist(images: &Path, labels: &Path) -> Result<Dataset> {
    let (n, rows, cols, pixels) = read_idx_images(images)?;
    let labels_v = read_idx_labels(labels)?;
    if labels_v.len() != n {
        return Err(idx_err(labels, format!("{} labels for {n} images", labels_v.len())));
    }
    if let Some(&bad) = labels_v.iter().find(|&&l| l >= 10) {
        return Err(idx_err(labels, format!("label {bad} is not a digit")));
    }
    let features = pixels.iter().map(|&p| p as f32 / 255.0).collect();
    Dataset::new(features, labels_v, rows * cols, 10)
}

/// Gaussian blobs around random class prototypes.
///
/// Each prototype is a sparse pattern in [0, 1]. An example of class `y` is
/// `w·p_y + (1 − w)·p_r + noise·ε`, clamped to [0, 1], where `r` is a
/// uniformly drawn class and `ε` is standard normal per feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub train_size: usize,
    pub test_size: usize,
    pub features: usize,
    pub classes: usize,
    /// Fraction of active pixels in a prototype.
    pub density: f64,
    /// Weight `w` of the true prototype.
    pub class_weight: f64,
    pub noise: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            train_size: 20_000,
            test_size: 2_000,
            features: 784,
            classes: 10,
            density: 0.2,
            class_weight: 0.6,
            noise: 0.8,
        }
    }
}

impl SyntheticSpec {
    pub fn validate(&self) -> Result<()> {
        if self.features == 0 || self.classes < 2 || self.classes > 256 {
            return Err(Error::config("synthetic data needs ≥ 1 feature and 2..=256 classes"));
        }
        if self.train_size == 0 || self.test_size == 0 {
            return Err(Error::config("synthetic train and test sets must be non-empty"));
        }
        if !(0.0..=1.0).contains(&self.density) || !(0.0..=1.0).contains(&self.class_weight) {
            return Err(Error::config("density and class_weight must lie in [0, 1]"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::config("noise must be non-negative"));
        }
        Ok(())
    }

    /// Generates `(train, test)` from the dataset stream.
    pub fn generate(&self, streams: &Streams) -> Result<(Dataset, Dataset)> {
        self.validate()?;
        let mut rng = streams.rng(Stream::Dataset, &[0]);
        let prototypes: Vec<Vec<f32>> = (0..self.classes)
            .map(|_| {
                (0..self.features)
                    .map(|_| if rng.random::<f64>() < self.density { rng.random_range(0.5..1.0) } else { 0.0 })
                    .collect()
            })
            .collect();
        let train = self.sample(&prototypes, self.train_size, &mut streams.rng(Stream::Dataset, &[1]))?;
        let test = self.sample(&prototypes, self.test_size, &mut streams.rng(Stream::Dataset, &[2]))?;
        Ok((train, test))
    }

    fn sample<R: Rng>(&self, prototypes: &[Vec<f32>], n: usize, rng: &mut R) -> Result<Dataset> {
        let w = self.class_weight as f32;
        let mut features = Vec::with_capacity(n * self.features);
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            // Balanced classes, shuffled below.
            let y = i % self.classes;
            let r = rng.random_range(0..self.classes);
            for f in 0..self.features {
                let e: f64 = StandardNormal.sample(rng);
                let v = w * prototypes[y][f] + (1.0 - w) * prototypes[r][f] + (self.noise * e) as f32;
                features.push(v.clamp(0.0, 1.0));
            }
            labels.push(y as u8);
        }
        let data = Dataset::new(features, labels, self.features, self.classes)?;
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(rng);
        Ok(data.subset(&order))
    }
}
