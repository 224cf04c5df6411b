//! Labeled and unlabeled sample pools keyed by stable identifiers.

use serde::{Deserialize, Serialize};

/// A labeled point. `index` is its stable identifier in the source dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: usize,
    pub index: usize,
}

impl Sample {
    pub fn new(x: Vec<f64>, y: usize, index: usize) -> Self {
        Self { x, y, index }
    }

    pub fn one_hot(&self, classes: usize) -> Vec<f64> {
        let mut v = vec![0.0; classes];
        v[self.y] = 1.0;
        v
    }
}

/// The labeled set S.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledPool {
    samples: Vec<Sample>,
}

impl LabeledPool {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn contains_index(&self, index: usize) -> bool {
        self.samples.iter().any(|s| s.index == index)
    }

    pub fn push(&mut self, sample: Sample) {
        self.samples.push(sample);
    }

    pub fn extend(&mut self, samples: impl IntoIterator<Item = Sample>) {
        self.samples.extend(samples);
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.x.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.y).collect()
    }
}

/// An unlabeled point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub index: usize,
    pub x: Vec<f64>,
}

/// The unlabeled set U.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct UnlabeledPool {
    candidates: Vec<Candidate>,
}

impl UnlabeledPool {
    pub fn new(candidates: Vec<Candidate>) -> Self {
        Self { candidates }
    }

    pub fn candidates(&self) -> &[Candidate] {
        &self.candidates
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, index: usize) -> Option<&Candidate> {
        self.candidates.iter().find(|c| c.index == index)
    }

    /// Removes and returns the candidates with the given identifiers, in the
    /// order requested. Unknown identifiers are skipped.
    pub fn take(&mut self, indices: &[usize]) -> Vec<Candidate> {
        let mut out = Vec::with_capacity(indices.len());
        for &idx in indices {
            if let Some(pos) = self.candidates.iter().position(|c| c.index == idx) {
                out.push(self.candidates.remove(pos));
            }
        }
        out
    }
}
