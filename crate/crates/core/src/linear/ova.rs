use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dcd::DcdSettings;
use super::{argmax, svm_train_binary_with, LinearModel};
use crate::{Error, Result};

/// One binary machine per class; prediction is the class of the largest margin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvaModel {
    /// Class label of each head, ascending.
    pub classes: Vec<usize>,
    pub models: Vec<LinearModel>,
}

impl OvaModel {
    pub fn dim(&self) -> usize {
        self.models.first().map_or(0, LinearModel::dim)
    }

    pub fn margins(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.models.iter().map(|m| m.predict_margin(x)).collect()
    }

    /// Argmax of the margins; ties go to the lowest class index.
    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        Ok(self.classes[argmax(&self.margins(x)?)])
    }

    pub fn predict_all(&self, xs: &[Vec<f64>]) -> Result<Vec<usize>> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

pub fn ova_train(x: &[Vec<f64>], labels: &[usize], c: f64) -> Result<OvaModel> {
    ova_train_with(x, labels, c, DcdSettings::default())
}

pub fn ova_train_with(
    x: &[Vec<f64>],
    labels: &[usize],
    c: f64,
    settings: DcdSettings,
) -> Result<OvaModel> {
    if labels.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: labels.len(),
        });
    }
    let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
    if classes.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "one-vs-all needs at least two classes, found {}",
            classes.len()
        )));
    }
    let models = classes
        .par_iter()
        .map(|&class| {
            let y: Vec<f64> = labels.iter().map(|&l| if l == class { 1.0 } else { -1.0 }).collect();
            svm_train_binary_with(x, &y, c, settings, &mut |_, _| {}).map(|f| f.model)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OvaModel { classes, models })
}
