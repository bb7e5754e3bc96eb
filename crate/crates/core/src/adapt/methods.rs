//! End-to-end target classifiers built from the adaptation blocks.

use serde::{Deserialize, Serialize};

use super::dam::{dam_train_ova, DamConfig};
use super::gfk::gfk_compute;
use super::pca::{pca_subspace, subspace_disagreement_dim};
use super::reshape::{split_by_domain, DomainAssignment};
use super::sa::{sa_align, sa_map_source, sa_map_target};
use crate::data::Dataset;
use crate::linear::{cv_select_c, ova_train, CvGrid, OvaModel};
use crate::metrics::recognition_rate;
use crate::{Error, Result};

/// Shared knobs of the adaptation pipelines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdaptSettings {
    pub c_grid: Vec<f64>,
    pub cv_folds: usize,
    pub seed: u64,
    /// Fixed subspace dimension; chosen by subspace disagreement when absent.
    pub subspace_dim: Option<usize>,
    pub dam_theta: f64,
    pub dam_gamma: f64,
    pub dam_epsilon: f64,
}

impl Default for AdaptSettings {
    fn default() -> Self {
        AdaptSettings {
            c_grid: crate::linear::default_c_grid(),
            cv_folds: 2,
            seed: 0,
            subspace_dim: None,
            dam_theta: 1.0,
            dam_gamma: 0.5,
            dam_epsilon: 0.1,
        }
    }
}

impl AdaptSettings {
    pub fn grid(&self) -> CvGrid {
        CvGrid::new(self.c_grid.clone(), self.cv_folds, self.seed)
    }

    fn dim_for(&self, xs: &[Vec<f64>], xt: &[Vec<f64>]) -> Result<usize> {
        match self.subspace_dim {
            Some(k) => Ok(k),
            None => {
                let d = xs.first().map_or(0, Vec::len);
                subspace_disagreement_dim(xs, xt, (d / 2).max(1))
            }
        }
    }
}

/// One-vs-all machine on the source with cross-validated `C`.
pub fn source_ova(source: &Dataset, settings: &AdaptSettings) -> Result<OvaModel> {
    let x = source.features();
    let y = source.labels();
    let c = cv_select_c(&x, &y, &settings.grid())?;
    ova_train(&x, &y, c)
}

/// Subspace alignment followed by a linear machine in aligned coordinates.
pub fn sa_classify(source: &Dataset, target: &[Vec<f64>], settings: &AdaptSettings) -> Result<Vec<usize>> {
    let xs = source.features();
    let k = settings.dim_for(&xs, target)?;
    let bs = pca_subspace(&xs, k)?;
    let bt = pca_subspace(target, k)?;
    let a = sa_align(&bs, &bt)?;
    let zs: Vec<Vec<f64>> = xs.iter().map(|x| sa_map_source(&bs, &a, x)).collect();
    let zt: Vec<Vec<f64>> = target.iter().map(|x| sa_map_target(&bt, x)).collect();
    let y = source.labels();
    let c = cv_select_c(&zs, &y, &settings.grid())?;
    ova_train(&zs, &y, c)?.predict_all(&zt)
}

/// Linear machine under the geodesic flow kernel `x^T G y`, via `G^{1/2}`.
pub fn gfk_svm_classify(source: &Dataset, target: &[Vec<f64>], settings: &AdaptSettings) -> Result<Vec<usize>> {
    let xs = source.features();
    let k = settings.dim_for(&xs, target)?;
    let g = gfk_compute(&pca_subspace(&xs, k)?, &pca_subspace(target, k)?)?;
    let root = g.sqrt();
    let map = |x: &Vec<f64>| -> Vec<f64> { (0..root.nrows()).map(|i| root.row(i).iter().zip(x).map(|(a, b)| a * b).sum()).collect() };
    let zs: Vec<Vec<f64>> = xs.iter().map(map).collect();
    let zt: Vec<Vec<f64>> = target.iter().map(map).collect();
    let y = source.labels();
    let c = cv_select_c(&zs, &y, &settings.grid())?;
    ova_train(&zs, &y, c)?.predict_all(&zt)
}

/// Unsupervised single-source DAM on one-vs-all source margins.
pub fn dam_classify(source: &Dataset, target: &[Vec<f64>], settings: &AdaptSettings) -> Result<Vec<usize>> {
    let x = source.features();
    let y = source.labels();
    let c = cv_select_c(&x, &y, &settings.grid())?;
    let src = ova_train(&x, &y, c)?;
    let cfg = DamConfig {
        theta: settings.dam_theta,
        gammas: vec![settings.dam_gamma],
        epsilon: settings.dam_epsilon,
        c,
    };
    let dam = dam_train_ova(&[src], target, &cfg)?;
    target.iter().map(|t| dam.predict(t)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ReshapeMode {
    /// Every sub-domain alone as SA source; the best on the target is reported.
    BestSubdomainSa,
    /// Two sub-domains as DAM sources with weights `(g, 1 - g)` for each `g`.
    WeightedDam { gamma_grid: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReshapeEntry {
    pub configuration: String,
    /// Target recognition rate in percent.
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReshapeCombineResult {
    pub table: Vec<ReshapeEntry>,
    /// Index of the best entry (first on ties).
    pub best: usize,
    pub best_predictions: Vec<usize>,
}

impl ReshapeCombineResult {
    pub fn best_accuracy(&self) -> f64 {
        self.table[self.best].accuracy
    }
}

/// Combines discovered sub-domains with SA or DAM. Selection uses the target
/// labels, so the reported best is an oracle choice.
pub fn reshape_combine(
    source: &Dataset,
    assignment: &DomainAssignment,
    target: &[Vec<f64>],
    target_labels: &[usize],
    mode: &ReshapeMode,
    settings: &AdaptSettings,
) -> Result<ReshapeCombineResult> {
    if assignment.n_domains < 2 {
        return Err(Error::invalid("combination needs at least two sub-domains"));
    }
    let subs = split_by_domain(source, assignment)?;
    let mut rows: Vec<(String, Vec<usize>)> = Vec::new();
    match mode {
        ReshapeMode::BestSubdomainSa => {
            for (j, sub) in subs.iter().enumerate() {
                rows.push((format!("domain{j}"), sa_classify(sub, target, settings)?));
            }
        }
        ReshapeMode::WeightedDam { gamma_grid } => {
            if gamma_grid.is_empty() {
                return Err(Error::invalid("empty gamma grid"));
            }
            if subs.len() != 2 {
                return Err(Error::invalid("weighted DAM combines exactly two sub-domains"));
            }
            let mut models = Vec::new();
            let mut cs = Vec::new();
            for sub in &subs {
                let x = sub.features();
                let y = sub.labels();
                let c = cv_select_c(&x, &y, &settings.grid())?;
                models.push(ova_train(&x, &y, c)?);
                cs.push(c);
            }
            if models[0].classes != models[1].classes {
                return Err(Error::invalid("sub-domains do not cover the same classes"));
            }
            let c = cs.iter().sum::<f64>() / cs.len() as f64;
            for &g in gamma_grid {
                let cfg = DamConfig {
                    theta: settings.dam_theta,
                    gammas: vec![g, 1.0 - g],
                    epsilon: settings.dam_epsilon,
                    c,
                };
                let dam = dam_train_ova(&models, target, &cfg)?;
                let p = target.iter().map(|t| dam.predict(t)).collect::<Result<Vec<_>>>()?;
                rows.push((format!("gamma1={g}"), p));
            }
        }
    }
    let mut table = Vec::new();
    let mut best = 0;
    for (i, (name, p)) in rows.iter().enumerate() {
        let acc = recognition_rate(p, target_labels)?;
        if acc > table.get(best).map_or(f64::NEG_INFINITY, |e: &ReshapeEntry| e.accuracy) {
            best = i;
        }
        table.push(ReshapeEntry {
            configuration: name.clone(),
            accuracy: acc,
        });
    }
    Ok(ReshapeCombineResult {
        table,
        best,
        best_predictions: rows.swap_remove(best).1,
    })
}
