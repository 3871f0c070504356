//! Synthetic data generators and CSV ingestion.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::vecmath::RngStream;

/// Distance of every blob center from the origin.
///
/// Class `c` is centred at `+SCALE·e_c` for `c < d` and at `−SCALE·e_{c−d}`
/// otherwise, so at most `2d` classes are supported.
pub const BLOB_CENTER_SCALE: f64 = 3.0;

/// Isotropic Gaussian clusters around fixed class centers.
#[derive(Clone, Debug, PartialEq)]
pub struct BlobGenerator {
    classes: usize,
    dim: usize,
    spread: f64,
}

impl BlobGenerator {
    pub fn new(classes: usize, dim: usize, spread: f64) -> Result<Self> {
        if classes < 2 {
            return Err(Error::invalid(format!("blobs need at least 2 classes, got {classes}")));
        }
        if dim == 0 || classes > 2 * dim {
            return Err(Error::invalid(format!(
                "{classes} blob classes do not fit in dimension {dim} (max 2·d)"
            )));
        }
        if !(spread >= 0.0 && spread.is_finite()) {
            return Err(Error::invalid(format!("spread must be >= 0, got {spread}")));
        }
        Ok(BlobGenerator { classes, dim, spread })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn center(&self, class: usize) -> Vec<f64> {
        let mut c = vec![0.0; self.dim];
        if class < self.dim {
            c[class] = BLOB_CENTER_SCALE;
        } else {
            c[class - self.dim] = -BLOB_CENTER_SCALE;
        }
        c
    }

    pub fn sample_class(&self, class: usize, rng: &mut RngStream) -> Sample {
        let features = self
            .center(class)
            .into_iter()
            .map(|c| c + self.spread * rng.normal())
            .collect();
        Sample::new(features, class)
    }

    /// A sample from a uniformly chosen class.
    pub fn sample(&self, rng: &mut RngStream) -> Sample {
        let class = rng.index(self.classes);
        self.sample_class(class, rng)
    }

    /// `n_per_class` samples per class, classes interleaved.
    pub fn generate(&self, n_per_class: usize, seed: u64) -> Result<Dataset> {
        if n_per_class == 0 {
            return Err(Error::invalid("n_per_class must be at least 1"));
        }
        let mut rng = RngStream::new(seed);
        let mut samples = Vec::with_capacity(n_per_class * self.classes);
        for _ in 0..n_per_class {
            for c in 0..self.classes {
                samples.push(self.sample_class(c, &mut rng));
            }
        }
        Dataset::new(samples)
    }
}

pub fn generate_blobs(k: usize, n_per_class: usize, d: usize, spread: f64, seed: u64) -> Result<Dataset> {
    BlobGenerator::new(k, d, spread)?.generate(n_per_class, seed)
}

/// Zero-mean Gaussian points with standard deviation `std`, projected into
/// the ball of radius `clip`. Labels are 0.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianGenerator {
    dim: usize,
    std: f64,
    clip: f64,
}

impl GaussianGenerator {
    pub fn new(dim: usize, std: f64, clip: f64) -> Result<Self> {
        if dim == 0 || !(std >= 0.0) || !(clip > 0.0) {
            return Err(Error::invalid("gaussian generator needs d > 0, std >= 0, clip > 0"));
        }
        Ok(GaussianGenerator { dim, std, clip })
    }

    pub fn sample(&self, rng: &mut RngStream) -> Sample {
        let mut v: Vec<f64> = (0..self.dim).map(|_| self.std * rng.normal()).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > self.clip {
            let s = self.clip / norm;
            for a in &mut v {
                *a *= s;
            }
        }
        Sample::new(v, 0)
    }

    pub fn generate(&self, n: usize, seed: u64) -> Result<Dataset> {
        let mut rng = RngStream::new(seed);
        Dataset::new((0..n).map(|_| self.sample(&mut rng)).collect())
    }
}

pub fn generate_gaussian(n: usize, d: usize, std: f64, clip: f64, seed: u64) -> Result<Dataset> {
    GaussianGenerator::new(d, std, clip)?.generate(n, seed)
}

/// Reads a header-less CSV: feature columns, then an integer label.
pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    let err = |row: usize, column: usize, message: String| Error::Csv {
        path: path.to_path_buf(),
        row,
        column,
        message,
    };
    let mut samples = Vec::new();
    let mut width = None;
    for (r, line) in text.lines().enumerate() {
        let row = r + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() < 2 {
            return Err(err(row, 1, "need at least one feature and a label".into()));
        }
        match width {
            None => width = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(err(
                    row,
                    fields.len(),
                    format!("expected {w} columns, found {}", fields.len()),
                ));
            }
            Some(_) => {}
        }
        let (label_field, feature_fields) = fields.split_last().expect("at least two fields");
        let mut features = Vec::with_capacity(feature_fields.len());
        for (c, f) in feature_fields.iter().enumerate() {
            let v: f64 = f.parse().map_err(|_| err(row, c + 1, format!("not a number: {f:?}")))?;
            if !v.is_finite() {
                return Err(err(row, c + 1, format!("non-finite value {f:?}")));
            }
            features.push(v);
        }
        let label: usize = label_field.parse().map_err(|_| {
            err(
                row,
                fields.len(),
                format!("label is not a non-negative integer: {label_field:?}"),
            )
        })?;
        samples.push(Sample::new(features, label));
    }
    if samples.is_empty() {
        return Err(err(0, 0, "file contains no rows".into()));
    }
    Dataset::new(samples)
}

pub fn write_csv(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for s in data.samples() {
        for f in &s.features {
            write!(out, "{f},")?;
        }
        writeln!(out, "{}", s.label)?;
    }
    out.flush()?;
    Ok(())
}
