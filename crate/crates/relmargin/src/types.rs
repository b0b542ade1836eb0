//! Core data types: samples, datasets, hyperparameters.

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// One labelled observation. Labels are -1 or +1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub features: Vec<f64>,
    pub label: i32,
}

impl Sample {
    pub fn new(features: Vec<f64>, label: i32) -> Self {
        Sample { features, label }
    }
}

/// A labelled dataset with a fixed feature dimension.
///
/// Construction validates that the set is non-empty, that every sample has
/// the same dimension, that all feature values are finite and that labels
/// are -1 or +1.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    dim: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput("dataset has no samples".into()));
        }
        let dim = samples[0].features.len();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: s.features.len() });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidParam(format!(
                    "sample {i} contains a non-finite feature value"
                )));
            }
            if s.label != -1 && s.label != 1 {
                return Err(Error::InvalidParam(format!(
                    "sample {i} has label {}, expected -1 or +1",
                    s.label
                )));
            }
        }
        Ok(Dataset { samples, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Sample> {
        self.samples.iter()
    }

    /// Number of samples with label +1.
    pub fn positives(&self) -> usize {
        self.samples.iter().filter(|s| s.label == 1).count()
    }

    /// Splits off the listed indices into a new dataset, returning
    /// (selected, rest). Indices must be valid and unique.
    pub fn split_by_indices(&self, selected: &[usize]) -> (Vec<Sample>, Vec<Sample>) {
        let mut mask = vec![false; self.samples.len()];
        for &i in selected {
            mask[i] = true;
        }
        let mut inside = Vec::with_capacity(selected.len());
        let mut outside = Vec::with_capacity(self.samples.len() - selected.len());
        for (i, s) in self.samples.iter().enumerate() {
            if mask[i] {
                inside.push(s.clone());
            } else {
                outside.push(s.clone());
            }
        }
        (inside, outside)
    }
}

/// Slack penalisation order for the solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossOrder {
    /// Linear slack penalty; box-constrained duals.
    L1,
    /// Squared slack penalty; unbounded non-negative duals.
    L2,
    /// No slack: hard constraints.
    Hard,
}

/// Per-class override for a scalar hyperparameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerClass {
    pub pos: f64,
    pub neg: f64,
}

/// Hyperparameters shared by the batch and online solvers.
///
/// `r` is the score bound: `r = 1` collapses the admissible band to a single
/// margin, `f64::INFINITY` removes the upper bound entirely. `c_outer`
/// penalises violations of the upper bound and defaults to `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HyperParams {
    pub c: f64,
    /// Penalty for upper-bound slack; `None` means "same as `c`".
    pub c_outer: Option<f64>,
    pub r: f64,
    /// Offset regularization weight; the offset enters the model as an extra
    /// homogeneous coordinate scaled by `1/h`.
    pub h: f64,
    pub loss_order: LossOrder,
    /// Optional per-class lower-bound penalty; overrides `c`.
    pub per_class_c: Option<PerClass>,
    /// Optional per-class score bound; overrides `r`.
    pub per_class_r: Option<PerClass>,
    pub max_iterations: usize,
    pub tolerance: f64,
    pub seed: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            c: 1.0,
            c_outer: None,
            r: f64::INFINITY,
            h: 1.0,
            loss_order: LossOrder::L1,
            per_class_c: None,
            per_class_r: None,
            max_iterations: 1000,
            tolerance: 1e-6,
            seed: 0,
        }
    }
}

impl HyperParams {
    /// Validates ranges: `c > 0` (infinity allowed), `r >= 1`, `h > 0`,
    /// `tolerance > 0`.
    pub fn validate(&self) -> Result<()> {
        if !(self.c > 0.0) {
            return Err(Error::InvalidParam(format!("c must be positive, got {}", self.c)));
        }
        if let Some(co) = self.c_outer {
            if !(co > 0.0) {
                return Err(Error::InvalidParam(format!(
                    "c_outer must be positive, got {co}"
                )));
            }
        }
        if !(self.r >= 1.0) {
            return Err(Error::InvalidParam(format!("r must be at least 1, got {}", self.r)));
        }
        if let Some(pc) = self.per_class_c {
            if !(pc.pos > 0.0) || !(pc.neg > 0.0) {
                return Err(Error::InvalidParam("per-class c must be positive".into()));
            }
        }
        if let Some(pr) = self.per_class_r {
            if !(pr.pos >= 1.0) || !(pr.neg >= 1.0) {
                return Err(Error::InvalidParam("per-class r must be at least 1".into()));
            }
        }
        if !(self.h > 0.0) || !self.h.is_finite() {
            return Err(Error::InvalidParam(format!(
                "h must be positive and finite, got {}",
                self.h
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::InvalidParam(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }

    /// Lower-bound penalty for a label.
    pub fn c_for(&self, label: i32) -> f64 {
        match self.per_class_c {
            Some(pc) if label > 0 => pc.pos,
            Some(pc) => pc.neg,
            None => self.c,
        }
    }

    /// Upper-bound penalty for a label.
    pub fn c_outer_for(&self, label: i32) -> f64 {
        let base = self.c_outer.unwrap_or(self.c);
        match self.per_class_c {
            // Per-class overrides scale the outer penalty by the same ratio.
            Some(pc) if label > 0 => base * pc.pos / self.c,
            Some(pc) => base * pc.neg / self.c,
            None => base,
        }
    }

    /// Score bound for a label.
    pub fn r_for(&self, label: i32) -> f64 {
        match self.per_class_r {
            Some(pr) if label > 0 => pr.pos,
            Some(pr) => pr.neg,
            None => self.r,
        }
    }
}

/// Maps a real-valued score to a class label. Zero maps to -1 so that the
/// decision function partitions the reals without a third outcome.
pub fn sign_decision(score: f64) -> i32 {
    if score > 0.0 {
        1
    } else {
        -1
    }
}

/// Dot product of two equal-length slices.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Squared Euclidean norm.
pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum()
}
