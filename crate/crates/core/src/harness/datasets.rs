//! Synthetic classification data and the CSV dataset format.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numfmt::fmt_g17;
use crate::pool::Sample;
use crate::rng;

fn default_mean_scale() -> f64 {
    1.0
}

/// Dataset source. Generated datasets carry their own seed, so the data is
/// the same across experiment seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// Class `k` is `N(mean_scale · e_k, sigma² I)` in `dim` dimensions.
    GaussianMixture {
        classes: usize,
        dim: usize,
        per_class: usize,
        sigma: f64,
        #[serde(default = "default_mean_scale")]
        mean_scale: f64,
        #[serde(default)]
        seed: u64,
    },
    /// Concentric 2-D rings: class `k` sits at radius `radii[k]` with
    /// Gaussian radial noise.
    Rings {
        radii: Vec<f64>,
        noise: f64,
        per_class: usize,
        #[serde(default)]
        seed: u64,
    },
    Csv {
        path: PathBuf,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.classes];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Row `i` as a sample whose identifier is `i`.
    pub fn sample(&self, i: usize) -> Sample {
        Sample::new(self.features[i].clone(), self.labels[i], i)
    }

    /// Writes `f0,...,f{d-1},label` followed by one row per sample.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (0..self.dim()).map(|j| format!("f{j}")).collect();
        header.push("label".into());
        w.write_record(&header)?;
        for (x, y) in self.features.iter().zip(&self.labels) {
            let mut row: Vec<String> = x.iter().map(|&v| fmt_g17(v)).collect();
            row.push(y.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        let dim = header.len().checked_sub(1).filter(|&d| d > 0).ok_or_else(|| {
            Error::Input(format!("{}: need at least one feature column and a label column", path.display()))
        })?;
        for (j, name) in header.iter().take(dim).enumerate() {
            if name != format!("f{j}") {
                return Err(Error::Input(format!("{}: column {j} is {name:?}, expected \"f{j}\"", path.display())));
            }
        }
        if &header[dim] != "label" {
            return Err(Error::Input(format!("{}: last column must be \"label\"", path.display())));
        }
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for (line, record) in r.records().enumerate() {
            let record = record?;
            let bad = |what: &str| Error::Input(format!("{}: row {}: {what}", path.display(), line + 1));
            let x = record
                .iter()
                .take(dim)
                .map(|v| v.trim().parse::<f64>().map_err(|_| bad("non-numeric feature")))
                .collect::<Result<Vec<_>>>()?;
            let y = record[dim].trim().parse::<usize>().map_err(|_| bad("label is not a nonnegative integer"))?;
            features.push(x);
            labels.push(y);
        }
        if labels.is_empty() {
            return Err(Error::Input(format!("{}: no rows", path.display())));
        }
        let classes = labels.iter().max().map_or(0, |m| m + 1);
        Ok(Self { features, labels, classes })
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            DatasetSpec::GaussianMixture { classes, dim, per_class, sigma, mean_scale, .. } => {
                if *classes < 2 {
                    return Err(Error::Config("gaussian_mixture needs at least 2 classes".into()));
                }
                if dim < classes {
                    return Err(Error::Config(format!("gaussian_mixture needs dim ≥ classes, got {dim} < {classes}")));
                }
                if *per_class == 0 {
                    return Err(Error::Config("gaussian_mixture per_class must be positive".into()));
                }
                if !(*sigma > 0.0) || !mean_scale.is_finite() {
                    return Err(Error::Config(format!("gaussian_mixture sigma must be positive, got {sigma}")));
                }
            }
            DatasetSpec::Rings { radii, noise, per_class, .. } => {
                if radii.len() < 2 {
                    return Err(Error::Config("rings needs at least 2 radii".into()));
                }
                if radii.iter().any(|r| !(*r > 0.0)) {
                    return Err(Error::Config("rings radii must be positive".into()));
                }
                if *per_class == 0 {
                    return Err(Error::Config("rings per_class must be positive".into()));
                }
                if !(*noise > 0.0) {
                    return Err(Error::Config(format!("rings noise must be positive, got {noise}")));
                }
            }
            DatasetSpec::Csv { .. } => {}
        }
        Ok(())
    }

    pub fn generate(&self) -> Result<Dataset> {
        self.validate()?;
        match self {
            DatasetSpec::GaussianMixture { classes, dim, per_class, sigma, mean_scale, seed } => {
                let mut rng = rng::stream(*seed, "dataset", 0);
                let noise = Normal::new(0.0, *sigma).map_err(|e| Error::Config(e.to_string()))?;
                let mut features = Vec::with_capacity(classes * per_class);
                let mut labels = Vec::with_capacity(classes * per_class);
                for _ in 0..*per_class {
                    for k in 0..*classes {
                        let x: Vec<f64> = (0..*dim)
                            .map(|j| noise.sample(&mut rng) + if j == k { *mean_scale } else { 0.0 })
                            .collect();
                        features.push(x);
                        labels.push(k);
                    }
                }
                Ok(Dataset { features, labels, classes: *classes })
            }
            DatasetSpec::Rings { radii, noise, per_class, seed } => {
                let mut rng = rng::stream(*seed, "dataset", 0);
                let radial = Normal::new(0.0, *noise).map_err(|e| Error::Config(e.to_string()))?;
                let mut features = Vec::with_capacity(radii.len() * per_class);
                let mut labels = Vec::with_capacity(radii.len() * per_class);
                for _ in 0..*per_class {
                    for (k, r) in radii.iter().enumerate() {
                        let angle = rng.random_range(0.0..2.0 * PI);
                        let rho = r + radial.sample(&mut rng);
                        features.push(vec![rho * angle.cos(), rho * angle.sin()]);
                        labels.push(k);
                    }
                }
                Ok(Dataset { features, labels, classes: radii.len() })
            }
            DatasetSpec::Csv { path } => Dataset::read_csv(path),
        }
    }
}
