use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const NORMALIZATION_TOL: f64 = 1e-9;

/// A probability vector over the `k` classes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassDistribution {
    probs: Vec<f64>,
}

impl ClassDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|&p| !(0.0..=1.0 + NORMALIZATION_TOL).contains(&p)) {
            return Err(Error::InvalidConfig("class probability outside [0, 1]".into()));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > NORMALIZATION_TOL {
            return Err(Error::InvalidConfig(format!("class probabilities sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Point mass on class `c`.
    pub fn indicator(c: usize, k: usize) -> Self {
        let mut probs = vec![0.0; k];
        probs[c] = 1.0;
        Self { probs }
    }

    pub fn uniform(k: usize) -> Self {
        Self { probs: vec![1.0 / k as f64; k] }
    }

    /// Normalize non-negative weights; all-zero weights yield uniform.
    pub fn from_weights(weights: &[f64]) -> Self {
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Self::uniform(weights.len());
        }
        Self { probs: weights.iter().map(|w| w / sum).collect() }
    }

    /// Mean of a set of distributions; empty input yields uniform over `k`.
    pub fn mean<'a, I: IntoIterator<Item = &'a ClassDistribution>>(dists: I, k: usize) -> Self {
        let mut acc = vec![0.0; k];
        let mut count = 0usize;
        for d in dists {
            for (a, p) in acc.iter_mut().zip(&d.probs) {
                *a += p;
            }
            count += 1;
        }
        if count == 0 {
            return Self::uniform(k);
        }
        Self { probs: acc.into_iter().map(|a| a / count as f64).collect() }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn k(&self) -> usize {
        self.probs.len()
    }

    /// Most probable class; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for i in 1..self.probs.len() {
            if self.probs[i] > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn l1_distance(&self, other: &ClassDistribution) -> f64 {
        self.probs.iter().zip(&other.probs).map(|(a, b)| (a - b).abs()).sum()
    }
}
