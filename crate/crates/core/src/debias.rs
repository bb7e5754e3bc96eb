//! Shared visual-world model plus per-dataset bias vectors.
//!
//! Each dataset `i` gets the model `w_i = w_vw + delta_i`, learned by
//!
//! ```text
//! min 1/2 |w_vw|^2 + lambda/2 sum_i |delta_i|^2
//!     + C1 sum_ij hinge(y_ij w_vw.x_ij) + C2 sum_ij hinge(y_ij (w_vw + delta_i).x_ij)
//! ```
//!
//! With `v_i = sqrt(lambda) delta_i` the regulariser becomes `1/2 |(w_vw, v_1..v_n)|^2`
//! and both hinge families become ordinary max-margin terms on block-structured
//! feature vectors, so the problem is solved exactly by the same dual
//! coordinate descent as the plain machines (per-row box bounds C1 or C2).
//!
//! Datasets passed here are binary: class label 1 marks positives and 0
//! negatives. Offsets follow the augmented-feature convention of
//! [`crate::linear`] for the shared part and every delta alike.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{make_split, Dataset, SplitCounts, SplitSpec};
use crate::linalg::{axpy, dot, sq_norm};
use crate::linear::dcd::{self, DcdSettings, DualRows};
use crate::linear::LinearModel;
use crate::linear::{DeltaBlock, ModelDocument};
use crate::metrics::average_precision;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasModel {
    /// Augmented visual-world weights (`dim + 1`, offset last).
    pub w_vw: Vec<f64>,
    /// Augmented per-dataset bias vectors.
    pub deltas: Vec<Vec<f64>>,
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub xi_sum: f64,
    pub rho_sum: f64,
    pub objective: f64,
    pub passes: usize,
    pub converged: bool,
}

/// Which hyperplane of an [`UnbiasModel`] to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnbiasHead {
    VisualWorld,
    Dataset(usize),
}

impl UnbiasModel {
    pub fn dim(&self) -> usize {
        self.w_vw.len() - 1
    }

    pub fn n_datasets(&self) -> usize {
        self.deltas.len()
    }

    pub fn visual_world(&self) -> LinearModel {
        split_augmented(&self.w_vw, self.c1)
    }

    /// `w_vw + delta_i`.
    pub fn dataset_model(&self, i: usize) -> Result<LinearModel> {
        let d = self.deltas.get(i).ok_or(Error::IndexOutOfRange {
            index: i,
            len: self.deltas.len(),
        })?;
        let mut w = self.w_vw.clone();
        axpy(1.0, d, &mut w);
        Ok(split_augmented(&w, self.c2))
    }

    pub fn predict(&self, x: &[f64], head: UnbiasHead) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        match head {
            UnbiasHead::VisualWorld => Ok(augmented_dot(&self.w_vw, x)),
            UnbiasHead::Dataset(i) => {
                let d = self.deltas.get(i).ok_or(Error::IndexOutOfRange {
                    index: i,
                    len: self.deltas.len(),
                })?;
                Ok(augmented_dot(&self.w_vw, x) + augmented_dot(d, x))
            }
        }
    }

    /// Linear-model document with one delta block per dataset.
    pub fn to_document(&self, dataset_names: &[String]) -> ModelDocument {
        let mut doc = ModelDocument::from_linear(&self.visual_world());
        doc.deltas = self
            .deltas
            .iter()
            .enumerate()
            .map(|(i, d)| {
                let m = split_augmented(d, self.c2);
                DeltaBlock {
                    dataset: dataset_names.get(i).cloned().unwrap_or_else(|| format!("dataset{i}")),
                    weights: m.weights,
                    offset: m.offset,
                }
            })
            .collect();
        doc
    }
}

pub fn unbias_predict(model: &UnbiasModel, x: &[f64], head: UnbiasHead) -> Result<f64> {
    model.predict(x, head)
}

fn split_augmented(w: &[f64], c: f64) -> LinearModel {
    let d = w.len() - 1;
    LinearModel {
        weights: w[..d].to_vec(),
        offset: w[d],
        trained_c: c,
    }
}

fn augmented_dot(w: &[f64], x: &[f64]) -> f64 {
    dot(&w[..x.len()], x) + w[x.len()]
}

/// Maps binary datasets to `+1/-1` targets, rejecting other labels.
pub fn binary_targets(ds: &Dataset) -> Result<Vec<f64>> {
    ds.samples()
        .iter()
        .map(|s| match s.class_label {
            1 => Ok(1.0),
            0 => Ok(-1.0),
            other => Err(Error::invalid(format!(
                "dataset `{}` has label {other}; binary datasets use 1 (positive) and 0 (negative)",
                ds.name()
            ))),
        })
        .collect()
}

struct UnbiasRows<'a> {
    x: Vec<&'a [f64]>,
    dataset: Vec<usize>,
    dim: usize,
    n_datasets: usize,
    inv_sqrt_lambda: f64,
}

impl UnbiasRows<'_> {
    fn block(&self, i: usize) -> usize {
        (self.dataset[i / 2] + 1) * (self.dim + 1)
    }
}

// Row 2s is the shared-model hinge of sample s, row 2s+1 its dataset-model hinge.
impl DualRows for UnbiasRows<'_> {
    fn len(&self) -> usize {
        2 * self.x.len()
    }
    fn dim(&self) -> usize {
        (self.n_datasets + 1) * (self.dim + 1)
    }
    fn sq_norm(&self, i: usize) -> f64 {
        let base = sq_norm(self.x[i / 2]) + 1.0;
        if i % 2 == 0 {
            base
        } else {
            base * (1.0 + self.inv_sqrt_lambda * self.inv_sqrt_lambda)
        }
    }
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        let x = self.x[i / 2];
        let d = self.dim;
        let mut v = dot(x, &w[..d]) + w[d];
        if i % 2 == 1 {
            let b = self.block(i);
            v += self.inv_sqrt_lambda * (dot(x, &w[b..b + d]) + w[b + d]);
        }
        v
    }
    fn add_scaled(&self, i: usize, a: f64, w: &mut [f64]) {
        let x = self.x[i / 2];
        let d = self.dim;
        axpy(a, x, &mut w[..d]);
        w[d] += a;
        if i % 2 == 1 {
            let b = self.block(i);
            let s = a * self.inv_sqrt_lambda;
            axpy(s, x, &mut w[b..b + d]);
            w[b + d] += s;
        }
    }
}

/// `1/2 |w_vw|^2 + lambda/2 sum |delta_i|^2` over augmented vectors.
pub fn unbias_regularizer(w_vw: &[f64], deltas: &[Vec<f64>], lambda: f64) -> f64 {
    0.5 * sq_norm(w_vw) + 0.5 * lambda * deltas.iter().map(|d| sq_norm(d)).sum::<f64>()
}

/// Gradient of [`unbias_regularizer`]: `(w_vw, lambda * delta_1, ...)`.
pub fn unbias_regularizer_gradient(w_vw: &[f64], deltas: &[Vec<f64>], lambda: f64) -> (Vec<f64>, Vec<Vec<f64>>) {
    (
        w_vw.to_vec(),
        deltas.iter().map(|d| d.iter().map(|v| lambda * v).collect()).collect(),
    )
}

/// Full objective at an arbitrary point, with slacks as hinge losses.
pub fn unbias_objective(
    datasets: &[Dataset],
    w_vw: &[f64],
    deltas: &[Vec<f64>],
    lambda: f64,
    c1: f64,
    c2: f64,
) -> Result<f64> {
    let (xi, rho) = slack_sums(datasets, w_vw, deltas)?;
    Ok(unbias_regularizer(w_vw, deltas, lambda) + c1 * xi + c2 * rho)
}

fn slack_sums(datasets: &[Dataset], w_vw: &[f64], deltas: &[Vec<f64>]) -> Result<(f64, f64)> {
    let mut xi = 0.0;
    let mut rho = 0.0;
    for (i, ds) in datasets.iter().enumerate() {
        let y = binary_targets(ds)?;
        for (s, yi) in ds.samples().iter().zip(y) {
            let shared = augmented_dot(w_vw, &s.features);
            xi += (1.0 - yi * shared).max(0.0);
            rho += (1.0 - yi * (shared + augmented_dot(&deltas[i], &s.features))).max(0.0);
        }
    }
    Ok((xi, rho))
}

pub fn unbias_train(datasets: &[Dataset], lambda: f64, c1: f64, c2: f64) -> Result<UnbiasModel> {
    unbias_train_with(datasets, lambda, c1, c2, DcdSettings::default(), &mut |_, _| {})
}

/// As [`unbias_train`]; `observer(pass, objective)` sees the incumbent
/// objective after every solver pass.
pub fn unbias_train_with(
    datasets: &[Dataset],
    lambda: f64,
    c1: f64,
    c2: f64,
    settings: DcdSettings,
    observer: &mut dyn FnMut(usize, f64),
) -> Result<UnbiasModel> {
    if datasets.is_empty() {
        return Err(Error::Empty("no datasets given".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be positive (a zero lambda leaves the bias vectors unregularized), got {lambda}"
        )));
    }
    if !(c1.is_finite() && c1 >= 0.0 && c2.is_finite() && c2 >= 0.0) {
        return Err(Error::invalid("C1 and C2 must be finite and non-negative"));
    }
    let dim = datasets[0].dim();
    let mut x = Vec::new();
    let mut owner = Vec::new();
    let mut y = Vec::new();
    for (i, ds) in datasets.iter().enumerate() {
        if ds.dim() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: ds.dim(),
            });
        }
        let t = binary_targets(ds)?;
        let pos = t.iter().filter(|&&v| v > 0.0).count();
        if pos == 0 || pos == t.len() {
            return Err(Error::DegenerateLabels(format!(
                "dataset `{}` needs both positive and negative samples",
                ds.name()
            )));
        }
        for (s, ti) in ds.samples().iter().zip(t) {
            x.push(s.features.as_slice());
            owner.push(i);
            y.push(ti);
        }
    }
    let rows = UnbiasRows {
        x,
        dataset: owner,
        dim,
        n_datasets: datasets.len(),
        inv_sqrt_lambda: 1.0 / lambda.sqrt(),
    };
    let y2: Vec<f64> = y.iter().flat_map(|&v| [v, v]).collect();
    let cost: Vec<f64> = (0..y.len()).flat_map(|_| [c1, c2]).collect();
    let sol = dcd::solve(&rows, &y2, &cost, settings, observer);

    let block = dim + 1;
    let w_vw = sol.w[..block].to_vec();
    let deltas: Vec<Vec<f64>> = (0..datasets.len())
        .map(|i| {
            sol.w[(i + 1) * block..(i + 2) * block]
                .iter()
                .map(|v| v * rows.inv_sqrt_lambda)
                .collect()
        })
        .collect();
    let (xi_sum, rho_sum) = slack_sums(datasets, &w_vw, &deltas)?;
    Ok(UnbiasModel {
        objective: unbias_regularizer(&w_vw, &deltas, lambda) + c1 * xi_sum + c2 * rho_sum,
        w_vw,
        deltas,
        lambda,
        c1,
        c2,
        xi_sum,
        rho_sum,
        passes: sol.passes,
        converged: sol.converged,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasGrid {
    pub lambda_candidates: Vec<f64>,
    pub c1_candidates: Vec<f64>,
    pub c2_candidates: Vec<f64>,
}

impl Default for UnbiasGrid {
    fn default() -> Self {
        UnbiasGrid {
            lambda_candidates: vec![0.5, 1.0, 5.0, 10.0],
            c1_candidates: vec![1e2, 1e3, 1e4],
            c2_candidates: vec![10.0, 20.0, 40.0, 60.0, 80.0, 100.0],
        }
    }
}

impl UnbiasGrid {
    /// Triples in grid order: lambda outermost, then C1, then C2.
    pub fn triples(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::new();
        for &l in &self.lambda_candidates {
            for &a in &self.c1_candidates {
                for &b in &self.c2_candidates {
                    out.push((l, a, b));
                }
            }
        }
        out
    }
}

/// Validation score used to rank hyperparameter triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionMetric {
    AveragePrecision,
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnbiasSelection {
    pub lambda: f64,
    pub c1: f64,
    pub c2: f64,
    pub score: f64,
    /// Every triple with its mean validation score (`None` if training failed).
    pub table: Vec<((f64, f64, f64), Option<f64>)>,
}

/// Grid search over `(lambda, C1, C2)`.
///
/// Every source is split into stratified halves; the model trained on all
/// training halves is scored through `w_vw` on each validation half and the
/// per-source scores are averaged. Ties keep the earliest triple.
pub fn unbias_model_select(
    sources: &[Dataset],
    grid: &UnbiasGrid,
    metric: SelectionMetric,
    seed: u64,
) -> Result<UnbiasSelection> {
    if sources.len() < 2 {
        return Err(Error::invalid("model selection needs at least two source datasets"));
    }
    let mut train = Vec::new();
    let mut valid = Vec::new();
    for ds in sources {
        let counts: std::collections::BTreeMap<usize, usize> = ds
            .indices_by_class()
            .into_iter()
            .map(|(c, idx)| (c, idx.len() / 2))
            .collect();
        let rest = ds
            .indices_by_class()
            .into_iter()
            .map(|(c, idx)| (c, idx.len() - idx.len() / 2))
            .collect();
        let spec = SplitSpec {
            train: SplitCounts::Explicit(counts),
            test: SplitCounts::Explicit(rest),
            seed,
            repetition_index: 0,
        };
        let (tr, va) = make_split(ds, &spec)?;
        train.push(tr);
        valid.push(va);
    }
    let triples = grid.triples();
    if triples.is_empty() {
        return Err(Error::invalid("empty hyperparameter grid"));
    }
    let table: Vec<((f64, f64, f64), Option<f64>)> = triples
        .par_iter()
        .map(|&(l, a, b)| {
            let score = unbias_train(&train, l, a, b).and_then(|m| {
                let vw = m.visual_world();
                let mut total = 0.0;
                for va in &valid {
                    let y = binary_targets(va)?;
                    let margins: Vec<f64> = va.samples().iter().map(|s| vw.margin_unchecked(&s.features)).collect();
                    total += match metric {
                        SelectionMetric::AveragePrecision => {
                            let labels: Vec<bool> = y.iter().map(|&v| v > 0.0).collect();
                            average_precision(&margins, &labels)?
                        }
                        SelectionMetric::Accuracy => {
                            let ok = margins
                                .iter()
                                .zip(&y)
                                .filter(|(m, t)| crate::linear::sign(**m) == **t)
                                .count();
                            ok as f64 / y.len() as f64
                        }
                    };
                }
                Ok(total / valid.len() as f64)
            });
            match score {
                Ok(s) => ((l, a, b), Some(s)),
                Err(e) => {
                    log::warn!("unbias triple (lambda={l}, C1={a}, C2={b}) skipped: {e}");
                    ((l, a, b), None)
                }
            }
        })
        .collect();
    let mut best: Option<((f64, f64, f64), f64)> = None;
    for (t, s) in &table {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| *s > b) {
                best = Some((*t, *s));
            }
        }
    }
    let ((lambda, c1, c2), score) =
        best.ok_or_else(|| Error::invalid("every hyperparameter triple failed to train"))?;
    Ok(UnbiasSelection {
        lambda,
        c1,
        c2,
        score,
        table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::svm_train_binary;

    fn blob(name: &str, id: usize, shift: f64, n: usize) -> Dataset {
        let mut f = Vec::new();
        let mut l = Vec::new();
        for i in 0..n {
            let t = i as f64 * 0.83 + id as f64;
            f.push(vec![1.0 + 0.6 * t.sin() + shift, 0.6 * t.cos()]);
            l.push(1);
            f.push(vec![-1.0 + 0.6 * t.cos() + shift, 0.6 * t.sin() - 0.3]);
            l.push(0);
        }
        Dataset::from_parts(name, id, f, l).unwrap()
    }

    #[test]
    fn single_dataset_without_rho_is_plain_svm() {
        let ds = blob("a", 0, 0.2, 12);
        let m = unbias_train(std::slice::from_ref(&ds), 1.0, 5.0, 0.0).unwrap();
        assert!(m.deltas[0].iter().all(|v| *v == 0.0));
        let y = binary_targets(&ds).unwrap();
        let svm = svm_train_binary(&ds.features(), &y, 5.0).unwrap();
        let vw = m.visual_world();
        for (a, b) in vw.weights.iter().zip(&svm.weights) {
            assert!((a - b).abs() < 1e-4);
        }
        assert!((vw.offset - svm.offset).abs() < 1e-4);
    }

    #[test]
    fn identical_copies_get_identical_deltas() {
        let a = blob("a", 0, 0.5, 10);
        let b = a.with_collection(1);
        let m = unbias_train(&[a, b], 0.7, 10.0, 20.0).unwrap();
        for (x, y) in m.deltas[0].iter().zip(&m.deltas[1]) {
            assert!((x - y).abs() < 1e-6);
        }
    }

    #[test]
    fn predict_heads() {
        let a = blob("a", 0, 0.0, 8);
        let b = blob("b", 1, 1.5, 8);
        let m = unbias_train(&[a, b], 1.0, 10.0, 10.0).unwrap();
        let x = [0.3, -0.7];
        let vw = m.predict(&x, UnbiasHead::VisualWorld).unwrap();
        let d1 = m.predict(&x, UnbiasHead::Dataset(1)).unwrap();
        assert!((d1 - vw - augmented_dot(&m.deltas[1], &x)).abs() < 1e-12);
        assert!(matches!(m.predict(&x, UnbiasHead::Dataset(2)), Err(Error::IndexOutOfRange { .. })));
        assert!(m.predict(&[1.0], UnbiasHead::VisualWorld).is_err());
    }

    #[test]
    fn rejects_single_label_dataset() {
        let a = blob("a", 0, 0.0, 4);
        let b = Dataset::from_parts("bad", 1, vec![vec![0.0, 1.0]; 3], vec![1; 3]).unwrap();
        let err = unbias_train(&[a, b], 1.0, 1.0, 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels(m) if m.contains("bad")));
    }

    #[test]
    fn singleton_grid_selects_it() {
        let a = blob("a", 0, 0.0, 10);
        let b = blob("b", 1, 0.7, 10);
        let grid = UnbiasGrid {
            lambda_candidates: vec![2.0],
            c1_candidates: vec![3.0],
            c2_candidates: vec![4.0],
        };
        let s = unbias_model_select(&[a, b], &grid, SelectionMetric::AveragePrecision, 1).unwrap();
        assert_eq!((s.lambda, s.c1, s.c2), (2.0, 3.0, 4.0));
    }
}
