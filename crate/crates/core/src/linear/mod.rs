//! Deterministic linear max-margin classification.
//!
//! Binary machines minimise `1/2 |w~|^2 + C sum hinge(y w~.x~)` where `x~` is
//! the sample with a constant feature 1 appended, so the offset is part of
//! the regularised weight vector. Multiclass problems use one-vs-all.

pub(crate) mod dcd;
mod cv;
mod doc;
mod kernel;
mod ova;
mod svm;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use cv::{cv_select_c, cv_select_c_binary, default_c_grid, CvGrid};
pub use dcd::DcdSettings;
pub use doc::{DeltaBlock, ModelDocument, TIE_RULE_VERSION};
pub use kernel::{KernelMachine, KernelOva};
pub use ova::{ova_train, ova_train_with, OvaModel};
pub use svm::{svm_train_binary, svm_train_binary_with, SvmFit};

/// A hyperplane `w.x + b` with the trade-off it was trained with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub offset: f64,
    pub trained_c: f64,
}

impl LinearModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_margin(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(self.margin_unchecked(x))
    }

    /// `+1` when the margin is non-negative, `-1` otherwise.
    pub fn predict_label(&self, x: &[f64]) -> Result<f64> {
        Ok(sign(self.predict_margin(x)?))
    }

    pub(crate) fn margin_unchecked(&self, x: &[f64]) -> f64 {
        crate::linalg::dot(&self.weights, x) + self.offset
    }
}

/// Sign with `sign(0) = +1`.
pub fn sign(v: f64) -> f64 {
    if v >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn check_rows(x: &[Vec<f64>]) -> Result<usize> {
    let dim = x
        .first()
        .map(Vec::len)
        .ok_or_else(|| Error::Empty("training set".into()))?;
    for r in x {
        if r.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: r.len(),
            });
        }
        if r.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature value"));
        }
    }
    Ok(dim)
}
