//! Max-margin machines on precomputed kernels.
//!
//! Same conventions as the linear machines: hinge loss, and an offset folded
//! into the regulariser by training on `K + 1`.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::dcd::DcdSettings;
use super::{argmax, sign};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelMachine {
    /// `alpha_j * y_j` for each training sample.
    pub coefficients: Vec<f64>,
    pub trained_c: f64,
}

impl KernelMachine {
    /// Settings used when none are given: projected-gradient tolerance 1e-4.
    pub fn default_settings() -> DcdSettings {
        DcdSettings {
            tol: 1e-4,
            max_passes: 10_000,
        }
    }

    pub fn train(kernel: &[Vec<f64>], y: &[f64], c: f64, settings: DcdSettings) -> Result<Self> {
        let n = kernel.len();
        if y.len() != n || kernel.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("kernel must be square and match the label count"));
        }
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid(format!("C must be positive, got {c}")));
        }
        let pos = y.iter().filter(|&&v| v > 0.0).count();
        if pos == 0 || pos == n {
            return Err(Error::DegenerateLabels("kernel machine needs both labels".into()));
        }
        let mut alpha = vec![0.0; n];
        let mut g = vec![0.0; n];
        for _ in 0..settings.max_passes {
            let mut max_pg = 0.0f64;
            for i in 0..n {
                let grad = y[i] * g[i] - 1.0;
                let a = alpha[i];
                let pg = if a <= 0.0 {
                    grad.min(0.0)
                } else if a >= c {
                    grad.max(0.0)
                } else {
                    grad
                };
                max_pg = max_pg.max(pg.abs());
                if pg == 0.0 {
                    continue;
                }
                let q = kernel[i][i] + 1.0;
                let next = if q > 0.0 { (a - grad / q).clamp(0.0, c) } else { c };
                let delta = (next - a) * y[i];
                if delta != 0.0 {
                    alpha[i] = next;
                    for (gj, kij) in g.iter_mut().zip(&kernel[i]) {
                        *gj += delta * (kij + 1.0);
                    }
                }
            }
            if max_pg <= settings.tol {
                break;
            }
        }
        Ok(KernelMachine {
            coefficients: alpha.iter().zip(y).map(|(a, yi)| a * yi).collect(),
            trained_c: c,
        })
    }

    /// Decision value from the kernel row `k(x, train_j)`.
    pub fn margin(&self, kernel_row: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(kernel_row)
            .map(|(a, k)| a * (k + 1.0))
            .sum()
    }

    pub fn label(&self, kernel_row: &[f64]) -> f64 {
        sign(self.margin(kernel_row))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelOva {
    pub classes: Vec<usize>,
    pub machines: Vec<KernelMachine>,
}

impl KernelOva {
    pub fn train(kernel: &[Vec<f64>], labels: &[usize], c: f64, settings: DcdSettings) -> Result<Self> {
        let classes: Vec<usize> = labels.iter().copied().collect::<BTreeSet<_>>().into_iter().collect();
        if classes.len() < 2 {
            return Err(Error::DegenerateLabels("one-vs-all needs at least two classes".into()));
        }
        let machines = classes
            .iter()
            .map(|&cl| {
                let y: Vec<f64> = labels.iter().map(|&l| if l == cl { 1.0 } else { -1.0 }).collect();
                KernelMachine::train(kernel, &y, c, settings)
            })
            .collect::<Result<_>>()?;
        Ok(KernelOva { classes, machines })
    }

    pub fn predict(&self, kernel_row: &[f64]) -> usize {
        let m: Vec<f64> = self.machines.iter().map(|k| k.margin(kernel_row)).collect();
        self.classes[argmax(&m)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linear::svm_train_binary;

    #[test]
    fn linear_kernel_matches_linear_machine() {
        let x: Vec<Vec<f64>> = (0..24).map(|i| vec![(i as f64 * 0.9).sin() * 2.0, (i as f64 * 0.4).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] - 0.5 * r[1] > 0.2 { 1.0 } else { -1.0 }).collect();
        let k: Vec<Vec<f64>> = x.iter().map(|a| x.iter().map(|b| crate::linalg::dot(a, b)).collect()).collect();
        let tight = DcdSettings { tol: 1e-9, max_passes: 100_000 };
        let km = KernelMachine::train(&k, &y, 3.0, tight).unwrap();
        let lm = svm_train_binary(&x, &y, 3.0).unwrap();
        for (i, xi) in x.iter().enumerate() {
            let a = km.margin(&k[i]);
            let b = lm.predict_margin(xi).unwrap();
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }
}
