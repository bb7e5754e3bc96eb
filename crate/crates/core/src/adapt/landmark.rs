//! Landmark selection by kernel mean matching and the multi-scale landmark
//! classifier built on it.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gfk::{gfk_compute, gfk_kernel_eval, GfkMatrix};
use super::pca::{pca_subspace, subspace_disagreement_dim};
use crate::data::Dataset;
use crate::linalg::{median, sq_dist};
use crate::linear::{cv_select_c, ova_train, KernelMachine, KernelOva, CvGrid};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkSelection {
    pub beta: Vec<f64>,
    pub alpha: Vec<bool>,
    pub sigma: f64,
    pub threshold: f64,
    /// Squared kernel mean discrepancy at `beta`.
    pub objective: f64,
}

impl LandmarkSelection {
    pub fn selected(&self) -> Vec<usize> {
        (0..self.alpha.len()).filter(|&i| self.alpha[i]).collect()
    }
}

/// Euclidean projection onto `{b >= 0, sum b = total}`.
pub fn project_scaled_simplex(v: &[f64], total: f64) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - total) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// `b^T K b - 2 b^T kbar + cbar`.
fn mmd(k: &[Vec<f64>], kbar: &[f64], cbar: f64, b: &[f64]) -> f64 {
    let mut q = 0.0;
    for (i, row) in k.iter().enumerate() {
        if b[i] != 0.0 {
            q += b[i] * row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>();
        }
    }
    q - 2.0 * b.iter().zip(kbar).map(|(a, c)| a * c).sum::<f64>() + cbar
}

/// Minimises the kernel mean discrepancy between the weighted source and the
/// target over `{beta >= 0, sum_{m in c} beta_m = M_c / M}`, then thresholds
/// at the median weight.
pub fn landmark_select(ds: &Dataset, target: &[Vec<f64>], g: &GfkMatrix, sigma: f64) -> Result<LandmarkSelection> {
    let m = ds.len();
    if m < 2 {
        return Err(Error::invalid("landmark selection needs at least two source samples"));
    }
    if target.is_empty() {
        return Err(Error::Empty("target set".into()));
    }
    let xs = ds.features();
    let kern = |a: &[f64], b: &[f64]| gfk_kernel_eval(g, a, b, sigma);
    let k: Vec<Vec<f64>> = xs
        .par_iter()
        .map(|a| xs.iter().map(|b| kern(a, b)).collect::<Result<Vec<f64>>>())
        .collect::<Result<_>>()?;
    let n = target.len() as f64;
    let kbar: Vec<f64> = xs
        .par_iter()
        .map(|a| Ok(target.iter().map(|t| kern(a, t)).collect::<Result<Vec<f64>>>()?.iter().sum::<f64>() / n))
        .collect::<Result<_>>()?;
    let cbar = target
        .par_iter()
        .map(|a| Ok(target.iter().map(|t| kern(a, t)).collect::<Result<Vec<f64>>>()?.iter().sum::<f64>()))
        .collect::<Result<Vec<f64>>>()?
        .iter()
        .sum::<f64>()
        / (n * n);

    let groups = ds.indices_by_class();
    for (c, idx) in &groups {
        if idx.len() == 1 {
            log::warn!("class {c} has a single source sample; its weight is fixed by the class constraint");
        }
    }
    let project = |v: &[f64]| {
        let mut out = vec![0.0; m];
        for (_, idx) in &groups {
            let total = idx.len() as f64 / m as f64;
            let sub: Vec<f64> = idx.iter().map(|&i| v[i]).collect();
            for (&i, p) in idx.iter().zip(project_scaled_simplex(&sub, total)) {
                out[i] = p;
            }
        }
        out
    };
    let grad = |b: &[f64]| -> Vec<f64> {
        k.iter()
            .zip(&kbar)
            .map(|(row, kb)| 2.0 * (row.iter().zip(b).map(|(a, c)| a * c).sum::<f64>() - kb))
            .collect()
    };
    let lip = 2.0 * k.iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max);
    let step = 1.0 / lip.max(1e-12);

    let mut beta = vec![1.0 / m as f64; m];
    let mut y = beta.clone();
    let mut t = 1.0f64;
    let mut f_prev = mmd(&k, &kbar, cbar, &beta);
    for _ in 0..10_000 {
        let gy = grad(&y);
        let z: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - step * g).collect();
        let next = project(&z);
        let f_next = mmd(&k, &kbar, cbar, &next);
        if f_next > f_prev {
            // Restart momentum when the objective goes up.
            y.clone_from(&beta);
            t = 1.0;
            continue;
        }
        let change = next.iter().zip(&beta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        let mom = (t - 1.0) / t_next;
        y = next.iter().zip(&beta).map(|(a, b)| a + mom * (a - b)).collect();
        beta = next;
        t = t_next;
        f_prev = f_next;
        if change < 1e-13 {
            break;
        }
    }
    let threshold = median(&beta);
    let alpha = beta.iter().map(|&b| b > threshold).collect();
    Ok(LandmarkSelection {
        objective: mmd(&k, &kbar, cbar, &beta),
        beta,
        alpha,
        sigma,
        threshold,
    })
}

/// Median pairwise Euclidean distance over all samples.
pub fn median_pairwise_distance(x: &[Vec<f64>]) -> f64 {
    let mut d = Vec::with_capacity(x.len() * x.len().saturating_sub(1) / 2);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            d.push(sq_dist(&x[i], &x[j]).sqrt());
        }
    }
    if d.is_empty() {
        0.0
    } else {
        median(&d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandmarkConfig {
    pub q_range: Vec<i32>,
    pub c_grid: Vec<f64>,
    /// Subspace dimension of the auxiliary GFKs; chosen by subspace
    /// disagreement (up to `d / 2`) when absent.
    pub subspace_dim: Option<usize>,
    /// Step of the kernel-weight grid on the simplex.
    pub weight_step: f64,
}

impl Default for LandmarkConfig {
    fn default() -> Self {
        LandmarkConfig {
            q_range: vec![-2, -1, 0, 1, 2],
            c_grid: (-1..=4).map(|e| 10f64.powi(e)).collect(),
            subspace_dim: None,
            weight_step: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LandmarkResult {
    pub predictions: Vec<usize>,
    /// Scales that produced a usable auxiliary pair.
    pub used_q: Vec<i32>,
    /// Convex combination weight of each used scale.
    pub kernel_weights: Vec<f64>,
    pub c: f64,
    pub validation_accuracy: f64,
    pub landmark_counts: BTreeMap<i32, usize>,
    /// True when every scale was dropped and a plain linear machine was used.
    pub fallback: bool,
}

/// All points of the simplex in `n` coordinates on a grid of step `1/steps`.
fn simplex_grid(n: usize, steps: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, steps: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<f64>>) {
        if cur.len() == n - 1 {
            cur.push(left);
            out.push(cur.iter().map(|&v| v as f64 / steps as f64).collect());
            cur.pop();
            return;
        }
        for v in (0..=left).rev() {
            cur.push(v);
            rec(n, left - v, steps, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, steps, steps, &mut Vec::new(), &mut out);
    out
}

struct Scale {
    q: i32,
    g: GfkMatrix,
    width: f64,
    landmarks: Vec<usize>,
}

/// Multi-scale landmark classifier for an unlabeled target.
///
/// For every `q` the source samples selected at bandwidth `2^q sigma0` form
/// `L^q`; a GFK is computed between `Ds \ L^q` and `Dt + L^q`, giving the
/// kernel `exp(-d^T G_q d / s_q^2)` with `s_q` the median pairwise
/// `G_q`-distance. Machines are trained on the union of landmarks, and the
/// kernel weights and `C` are chosen by accuracy on the remaining source.
pub fn landmark_classifier(ds: &Dataset, target: &[Vec<f64>], cfg: &LandmarkConfig) -> Result<LandmarkResult> {
    if cfg.q_range.is_empty() || cfg.c_grid.is_empty() {
        return Err(Error::invalid("q_range and C grid must be non-empty"));
    }
    if target.is_empty() {
        return Err(Error::Empty("target set".into()));
    }
    let dim = ds.dim();
    let xs = ds.features();
    let labels = ds.labels();
    let pooled: Vec<Vec<f64>> = xs.iter().chain(target).cloned().collect();
    let sigma0 = median_pairwise_distance(&pooled);
    if sigma0 <= 0.0 {
        return Err(Error::invalid("all samples coincide; no bandwidth scale"));
    }
    let k = match cfg.subspace_dim {
        Some(k) => k,
        None => subspace_disagreement_dim(&xs, target, (dim / 2).max(1))?,
    };
    let ident = GfkMatrix::identity(dim);

    let scales: Vec<Option<Scale>> = cfg
        .q_range
        .par_iter()
        .map(|&q| -> Result<Option<Scale>> {
            let sigma = 2f64.powi(q) * sigma0;
            let sel = landmark_select(ds, target, &ident, sigma)?;
            let landmarks = sel.selected();
            if landmarks.is_empty() || landmarks.len() == ds.len() {
                log::warn!("landmark scale q={q} dropped: {} of {} source samples selected", landmarks.len(), ds.len());
                return Ok(None);
            }
            let rest: Vec<Vec<f64>> = (0..ds.len()).filter(|i| !sel.alpha[*i]).map(|i| xs[i].clone()).collect();
            let aux_t: Vec<Vec<f64>> = target.iter().cloned().chain(landmarks.iter().map(|&i| xs[i].clone())).collect();
            let (bs, bt) = match (pca_subspace(&rest, k), pca_subspace(&aux_t, k)) {
                (Ok(a), Ok(b)) => (a, b),
                (Err(e), _) | (_, Err(e)) => {
                    log::warn!("landmark scale q={q} dropped: {e}");
                    return Ok(None);
                }
            };
            let g = gfk_compute(&bs, &bt)?;
            let mut d = Vec::new();
            for (a, i) in landmarks.iter().enumerate() {
                for j in &landmarks[a + 1..] {
                    d.push(g.sq_dist(&xs[*i], &xs[*j]).sqrt());
                }
            }
            let width = if d.is_empty() { 1.0 } else { median(&d) };
            let width = if width > 0.0 { width } else { 1.0 };
            Ok(Some(Scale { q, g, width, landmarks }))
        })
        .collect::<Result<_>>()?;
    let scales: Vec<Scale> = scales.into_iter().flatten().collect();

    let mut landmark_counts = BTreeMap::new();
    for s in &scales {
        landmark_counts.insert(s.q, s.landmarks.len());
    }
    let mut train: Vec<usize> = scales.iter().flat_map(|s| s.landmarks.iter().copied()).collect();
    train.sort_unstable();
    train.dedup();
    let train_labels: Vec<usize> = train.iter().map(|&i| labels[i]).collect();
    let n_classes = train_labels.iter().collect::<std::collections::BTreeSet<_>>().len();
    if scales.is_empty() || n_classes < 2 {
        log::warn!("no usable landmark scale; falling back to a plain linear machine on the source");
        let c = cv_select_c(&xs, &labels, &CvGrid::new(cfg.c_grid.clone(), 2, 0)).unwrap_or(cfg.c_grid[0]);
        let m = ova_train(&xs, &labels, c)?;
        return Ok(LandmarkResult {
            predictions: m.predict_all(target)?,
            used_q: Vec::new(),
            kernel_weights: Vec::new(),
            c,
            validation_accuracy: f64::NAN,
            landmark_counts,
            fallback: true,
        });
    }
    let mut valid: Vec<usize> = (0..ds.len()).filter(|i| train.binary_search(i).is_err()).collect();
    if valid.is_empty() {
        log::warn!("landmarks cover the whole source; validating on the training set");
        valid = train.clone();
    }

    let kernel = |s: &Scale, a: &[f64], b: &[f64]| (-s.g.sq_dist(a, b) / (s.width * s.width)).exp();
    let gram = |rows: &[usize], pts: &(dyn Fn(usize) -> Vec<f64> + Sync)| -> Vec<Vec<Vec<f64>>> {
        scales
            .par_iter()
            .map(|s| {
                rows.iter()
                    .map(|&r| {
                        let x = pts(r);
                        train.iter().map(|&j| kernel(s, &x, &xs[j])).collect()
                    })
                    .collect()
            })
            .collect()
    };
    let k_train = gram(&train, &|i| xs[i].clone());
    let k_valid = gram(&valid, &|i| xs[i].clone());
    let t_idx: Vec<usize> = (0..target.len()).collect();
    let k_target = gram(&t_idx, &|i| target[i].clone());

    let combine = |parts: &[Vec<Vec<f64>>], w: &[f64]| -> Vec<Vec<f64>> {
        let (r, c) = (parts[0].len(), parts[0][0].len());
        (0..r)
            .map(|i| (0..c).map(|j| parts.iter().zip(w).map(|(p, wq)| wq * p[i][j]).sum()).collect())
            .collect()
    };
    let steps = (1.0 / cfg.weight_step).round().max(1.0) as usize;
    let weights = simplex_grid(scales.len(), steps);
    let configs: Vec<(usize, usize)> = (0..weights.len())
        .flat_map(|w| (0..cfg.c_grid.len()).map(move |c| (w, c)))
        .collect();
    let scores: Vec<Option<f64>> = configs
        .par_iter()
        .map(|&(wi, ci)| {
            let kt = combine(&k_train, &weights[wi]);
            let m = KernelOva::train(&kt, &train_labels, cfg.c_grid[ci], KernelMachine::default_settings()).ok()?;
            let kv = combine(&k_valid, &weights[wi]);
            let ok = valid.iter().zip(&kv).filter(|(i, row)| m.predict(row) == labels[**i]).count();
            Some(ok as f64 / valid.len() as f64)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for (i, s) in scores.iter().enumerate() {
        if let Some(s) = s {
            if best.is_none_or(|(_, b)| *s > b) {
                best = Some((i, *s));
            }
        }
    }
    let (bi, acc) = best.ok_or_else(|| Error::invalid("no kernel combination could be trained"))?;
    let (wi, ci) = configs[bi];
    let kt = combine(&k_train, &weights[wi]);
    let m = KernelOva::train(&kt, &train_labels, cfg.c_grid[ci], KernelMachine::default_settings())?;
    let ktar = combine(&k_target, &weights[wi]);
    Ok(LandmarkResult {
        predictions: ktar.iter().map(|row| m.predict(row)).collect(),
        used_q: scales.iter().map(|s| s.q).collect(),
        kernel_weights: weights[wi].clone(),
        c: cfg.c_grid[ci],
        validation_accuracy: acc,
        landmark_counts,
        fallback: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let p = project_scaled_simplex(&[0.5, 0.2, -1.0], 0.6);
        assert!((p.iter().sum::<f64>() - 0.6).abs() < 1e-12);
        assert!(p.iter().all(|v| *v >= 0.0));
        assert!((p[0] - 0.45).abs() < 1e-12 && (p[1] - 0.15).abs() < 1e-12 && p[2] == 0.0);
    }

    #[test]
    fn grid_points_on_simplex() {
        let g = simplex_grid(3, 10);
        assert_eq!(g.len(), 66);
        assert!(g.iter().all(|w| (w.iter().sum::<f64>() - 1.0).abs() < 1e-12));
        assert_eq!(simplex_grid(1, 10), vec![vec![1.0]]);
    }

    #[test]
    fn matching_sets_keep_uniform_weights() {
        let x: Vec<Vec<f64>> = (0..8).map(|i| vec![(i as f64).sin(), (i as f64 * 0.3).cos()]).collect();
        let l = vec![0, 1, 0, 1, 0, 1, 0, 1];
        let ds = Dataset::from_parts("s", 0, x.clone(), l).unwrap();
        let sel = landmark_select(&ds, &x, &GfkMatrix::identity(2), 1.0).unwrap();
        assert!(sel.objective <= 1e-10);
        assert!(sel.beta.iter().all(|b| (b - 0.125).abs() < 1e-6));
    }
}
