use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ova_train, svm_train_binary};
use crate::{rng, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvGrid {
    pub c_values: Vec<f64>,
    pub folds: usize,
    pub seed: u64,
}

/// `{1e-6, 1e-5, ..., 1e3}`.
pub fn default_c_grid() -> Vec<f64> {
    (-6..=3).map(|e| 10f64.powi(e)).collect()
}

impl CvGrid {
    pub fn new(c_values: Vec<f64>, folds: usize, seed: u64) -> Self {
        CvGrid { c_values, folds, seed }
    }

    pub fn with_default_values(folds: usize, seed: u64) -> Self {
        CvGrid::new(default_c_grid(), folds, seed)
    }

    fn validate(&self) -> Result<()> {
        if self.c_values.is_empty() {
            return Err(Error::invalid("C grid is empty"));
        }
        if self.c_values.iter().any(|c| !(c.is_finite() && *c > 0.0)) {
            return Err(Error::invalid("C grid values must be positive"));
        }
        if self.folds < 2 {
            return Err(Error::invalid("cross validation needs at least 2 folds"));
        }
        Ok(())
    }
}

/// Stratified fold index per sample.
fn stratified_folds<K: Ord + Copy + std::fmt::Debug>(keys: &[K], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let mut by_class: BTreeMap<K, Vec<usize>> = BTreeMap::new();
    for (i, k) in keys.iter().enumerate() {
        by_class.entry(*k).or_default().push(i);
    }
    let mut r = rng::stream(seed, 0, "cv-folds");
    let mut fold = vec![0; keys.len()];
    for (class, mut idx) in by_class {
        if idx.len() < folds {
            return Err(Error::Stratification(format!(
                "class {class:?} has {} samples, fewer than {folds} folds",
                idx.len()
            )));
        }
        idx.shuffle(&mut r);
        for (pos, i) in idx.into_iter().enumerate() {
            fold[i] = pos % folds;
        }
    }
    Ok(fold)
}

fn select<K, F>(keys: &[K], grid: &CvGrid, fit_score: F) -> Result<f64>
where
    K: Ord + Copy + std::fmt::Debug + Sync,
    F: Fn(f64, &[usize], &[usize]) -> Result<f64> + Sync,
{
    grid.validate()?;
    let fold = stratified_folds(keys, grid.folds, grid.seed)?;
    let mut cs = grid.c_values.clone();
    cs.sort_by(f64::total_cmp);
    cs.dedup();
    let jobs: Vec<(usize, usize)> = (0..cs.len())
        .flat_map(|ci| (0..grid.folds).map(move |f| (ci, f)))
        .collect();
    let scores = jobs
        .par_iter()
        .map(|&(ci, f)| {
            let train: Vec<usize> = (0..keys.len()).filter(|&i| fold[i] != f).collect();
            let valid: Vec<usize> = (0..keys.len()).filter(|&i| fold[i] == f).collect();
            fit_score(cs[ci], &train, &valid)
        })
        .collect::<Result<Vec<f64>>>()?;
    let mut best = (0usize, f64::NEG_INFINITY);
    for ci in 0..cs.len() {
        let mean = scores[ci * grid.folds..(ci + 1) * grid.folds].iter().sum::<f64>() / grid.folds as f64;
        if mean > best.1 {
            best = (ci, mean);
        }
    }
    Ok(cs[best.0])
}

/// Picks C for a one-vs-all machine by stratified k-fold accuracy; ties go
/// to the smallest C.
pub fn cv_select_c(x: &[Vec<f64>], labels: &[usize], grid: &CvGrid) -> Result<f64> {
    if grid.c_values.len() == 1 {
        grid.validate()?;
        return Ok(grid.c_values[0]);
    }
    select(labels, grid, |c, train, valid| {
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let tl: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
        let m = ova_train(&tx, &tl, c)?;
        let mut correct = 0usize;
        for &i in valid {
            if m.predict(&x[i])? == labels[i] {
                correct += 1;
            }
        }
        Ok(correct as f64 / valid.len() as f64)
    })
}

/// Binary (`+1/-1`) counterpart of [`cv_select_c`].
pub fn cv_select_c_binary(x: &[Vec<f64>], y: &[f64], grid: &CvGrid) -> Result<f64> {
    if grid.c_values.len() == 1 {
        grid.validate()?;
        return Ok(grid.c_values[0]);
    }
    let keys: Vec<i8> = y.iter().map(|&v| if v > 0.0 { 1 } else { -1 }).collect();
    select(&keys, grid, |c, train, valid| {
        let tx: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let ty: Vec<f64> = train.iter().map(|&i| y[i]).collect();
        let m = svm_train_binary(&tx, &ty, c)?;
        let mut correct = 0usize;
        for &i in valid {
            if m.predict_label(&x[i])? == y[i] {
                correct += 1;
            }
        }
        Ok(correct as f64 / valid.len() as f64)
    })
}
