//! Dual coordinate descent for hinge-loss max-margin problems.
//!
//! Solves `min_w 1/2 |w|^2 + sum_i c_i max(0, 1 - y_i w.x_i)` through its box
//! constrained dual, visiting coordinates in a fixed cyclic order. The design
//! vectors are abstracted behind [`DualRows`] so that structured problems
//! (augmented offsets, multi-task block layouts) avoid materialising them.
//!
//! The primal iterate implied by the dual variables is not monotone, so the
//! solver keeps the best primal point seen at the end of each pass; that
//! incumbent is what gets returned and reported to observers.

use crate::linalg::{axpy, sq_norm};

pub(crate) trait DualRows {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn sq_norm(&self, i: usize) -> f64;
    fn dot(&self, i: usize, w: &[f64]) -> f64;
    fn add_scaled(&self, i: usize, a: f64, w: &mut [f64]);
}

/// Dense samples with an implicit trailing constant feature of value 1.
pub(crate) struct Augmented<'a>(pub &'a [Vec<f64>]);

impl DualRows for Augmented<'_> {
    fn len(&self) -> usize {
        self.0.len()
    }
    fn dim(&self) -> usize {
        self.0.first().map_or(0, Vec::len) + 1
    }
    fn sq_norm(&self, i: usize) -> f64 {
        sq_norm(&self.0[i]) + 1.0
    }
    fn dot(&self, i: usize, w: &[f64]) -> f64 {
        let x = &self.0[i];
        crate::linalg::dot(x, &w[..x.len()]) + w[x.len()]
    }
    fn add_scaled(&self, i: usize, a: f64, w: &mut [f64]) {
        let x = &self.0[i];
        axpy(a, x, &mut w[..x.len()]);
        w[x.len()] += a;
    }
}

#[derive(Debug, Clone, Copy)]
pub struct DcdSettings {
    /// Stop when the largest projected-gradient magnitude of a pass is below this.
    pub tol: f64,
    pub max_passes: usize,
}

impl Default for DcdSettings {
    fn default() -> Self {
        DcdSettings {
            tol: 1e-6,
            max_passes: 100_000,
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct DcdSolution {
    pub w: Vec<f64>,
    pub alpha: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
    pub passes: usize,
    pub converged: bool,
}

pub(crate) fn primal_objective<R: DualRows>(rows: &R, y: &[f64], cost: &[f64], w: &[f64]) -> f64 {
    let loss: f64 = (0..rows.len())
        .filter(|&i| cost[i] > 0.0)
        .map(|i| cost[i] * (1.0 - y[i] * rows.dot(i, w)).max(0.0))
        .sum();
    0.5 * sq_norm(w) + loss
}

/// `observer(pass, incumbent_primal)` is called after every pass.
pub(crate) fn solve<R: DualRows>(
    rows: &R,
    y: &[f64],
    cost: &[f64],
    settings: DcdSettings,
    observer: &mut dyn FnMut(usize, f64),
) -> DcdSolution {
    let n = rows.len();
    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; rows.dim()];
    let diag: Vec<f64> = (0..n).map(|i| rows.sq_norm(i)).collect();

    let mut best_w = w.clone();
    let mut best_primal = primal_objective(rows, y, cost, &w);
    let mut passes = 0;
    let mut converged = false;

    while passes < settings.max_passes {
        passes += 1;
        let mut max_pg = 0.0f64;
        for i in 0..n {
            let upper = cost[i];
            if upper <= 0.0 {
                continue;
            }
            let g = y[i] * rows.dot(i, &w) - 1.0;
            let a = alpha[i];
            let pg = if a <= 0.0 {
                g.min(0.0)
            } else if a >= upper {
                g.max(0.0)
            } else {
                g
            };
            max_pg = max_pg.max(pg.abs());
            if pg != 0.0 {
                let next = if diag[i] > 0.0 {
                    (a - g / diag[i]).clamp(0.0, upper)
                } else if g < 0.0 {
                    upper
                } else {
                    0.0
                };
                if next != a {
                    rows.add_scaled(i, (next - a) * y[i], &mut w);
                    alpha[i] = next;
                }
            }
        }
        let primal = primal_objective(rows, y, cost, &w);
        if primal < best_primal {
            best_primal = primal;
            best_w.clone_from(&w);
        }
        observer(passes, best_primal);
        if max_pg <= settings.tol {
            converged = true;
            break;
        }
    }

    let dual = alpha.iter().sum::<f64>() - 0.5 * sq_norm(&w);
    DcdSolution {
        w: best_w,
        alpha,
        primal: best_primal,
        dual,
        passes,
        converged,
    }
}
