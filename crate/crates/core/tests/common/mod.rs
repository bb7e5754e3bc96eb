//! Independent reference solvers shared by the integration tests. None of
//! these call into the library's solvers; they only share data types.
#![allow(dead_code)]

use biasbench::data::Dataset;
use nalgebra::{DMatrix, DVector};

pub fn aug(x: &[f64]) -> Vec<f64> {
    let mut v = x.to_vec();
    v.push(1.0);
    v
}

pub fn dotp(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn hinge(v: f64) -> f64 {
    (1.0 - v).max(0.0)
}

fn largest_eigenvalue(q: &DMatrix<f64>) -> f64 {
    q.clone().symmetric_eigen().eigenvalues.max()
}

/// Maximises `sum(a) - 1/2 a'Qa` over the box `0 <= a <= upper` with
/// accelerated projected gradient and adaptive restarts.
pub fn box_qp_max(q: &DMatrix<f64>, upper: &[f64], iters: usize) -> Vec<f64> {
    let n = upper.len();
    let step = 1.0 / largest_eigenvalue(q).max(1e-12);
    let clip = |v: &DVector<f64>| DVector::from_iterator(n, v.iter().zip(upper).map(|(a, u)| a.clamp(0.0, *u)));
    let value = |a: &DVector<f64>| a.sum() - 0.5 * a.dot(&(q * a));
    let mut a = DVector::zeros(n);
    let mut y = a.clone();
    let mut t = 1.0f64;
    let mut best = value(&a);
    for _ in 0..iters {
        let grad = DVector::from_element(n, 1.0) - q * &y;
        let next = clip(&(&y + grad * step));
        let v = value(&next);
        if v < best {
            y = a.clone();
            t = 1.0;
            continue;
        }
        let tn = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = &next + (&next - &a) * ((t - 1.0) / tn);
        a = next;
        t = tn;
        best = v;
    }
    a.iter().copied().collect()
}

pub struct SvmOracle {
    pub w: Vec<f64>,
    pub primal: f64,
    pub dual: f64,
}

pub fn svm_primal(x: &[Vec<f64>], y: &[f64], c: f64, w: &[f64]) -> f64 {
    0.5 * dotp(w, w) + c * x.iter().zip(y).map(|(xi, yi)| hinge(yi * dotp(w, &aug(xi)))).sum::<f64>()
}

/// Binary SVM with the offset as an extra regularised coordinate.
pub fn svm_oracle(x: &[Vec<f64>], y: &[f64], c: f64) -> SvmOracle {
    let xa: Vec<Vec<f64>> = x.iter().map(|v| aug(v)).collect();
    let n = x.len();
    let q = DMatrix::from_fn(n, n, |i, j| y[i] * y[j] * dotp(&xa[i], &xa[j]));
    let a = box_qp_max(&q, &vec![c; n], 60_000);
    let mut w = vec![0.0; xa[0].len()];
    for i in 0..n {
        for (wk, xk) in w.iter_mut().zip(&xa[i]) {
            *wk += a[i] * y[i] * xk;
        }
    }
    let dual = a.iter().sum::<f64>() - 0.5 * dotp(&w, &w);
    SvmOracle {
        primal: svm_primal(x, y, c, &w),
        w,
        dual,
    }
}

pub struct UnbiasOracle {
    pub w_vw: Vec<f64>,
    pub deltas: Vec<Vec<f64>>,
    pub primal: f64,
    pub dual: f64,
}

pub fn unbias_primal(sets: &[(Vec<Vec<f64>>, Vec<f64>)], w: &[f64], deltas: &[Vec<f64>], lambda: f64, c1: f64, c2: f64) -> f64 {
    let mut obj = 0.5 * dotp(w, w) + 0.5 * lambda * deltas.iter().map(|d| dotp(d, d)).sum::<f64>();
    for (i, (x, y)) in sets.iter().enumerate() {
        for (xi, yi) in x.iter().zip(y) {
            let xa = aug(xi);
            let shared = dotp(w, &xa);
            obj += c1 * hinge(yi * shared) + c2 * hinge(yi * (shared + dotp(&deltas[i], &xa)));
        }
    }
    obj
}

/// Dual of the multi-dataset problem over one variable per shared-hinge term
/// and one per dataset-hinge term.
pub fn unbias_oracle(sets: &[(Vec<Vec<f64>>, Vec<f64>)], lambda: f64, c1: f64, c2: f64) -> UnbiasOracle {
    // (augmented x, y, owner, is_dataset_term)
    let mut rows: Vec<(Vec<f64>, f64, usize, bool)> = Vec::new();
    for (i, (x, y)) in sets.iter().enumerate() {
        for (xi, yi) in x.iter().zip(y) {
            rows.push((aug(xi), *yi, i, false));
            rows.push((aug(xi), *yi, i, true));
        }
    }
    let n = rows.len();
    let q = DMatrix::from_fn(n, n, |a, b| {
        let (xa, ya, ia, ra) = &rows[a];
        let (xb, yb, ib, rb) = &rows[b];
        let extra = if *ra && *rb && ia == ib { 1.0 / lambda } else { 0.0 };
        ya * yb * dotp(xa, xb) * (1.0 + extra)
    });
    let upper: Vec<f64> = rows.iter().map(|r| if r.3 { c2 } else { c1 }).collect();
    let a = box_qp_max(&q, &upper, 60_000);
    let dim = rows[0].0.len();
    let mut w = vec![0.0; dim];
    let mut deltas = vec![vec![0.0; dim]; sets.len()];
    for (k, (x, y, i, r)) in rows.iter().enumerate() {
        for j in 0..dim {
            w[j] += a[k] * y * x[j];
            if *r {
                deltas[*i][j] += a[k] * y * x[j] / lambda;
            }
        }
    }
    let av = DVector::from_column_slice(&a);
    let dual = av.sum() - 0.5 * av.dot(&(&q * &av));
    UnbiasOracle {
        primal: unbias_primal(sets, &w, &deltas, lambda, c1, c2),
        w_vw: w,
        deltas,
        dual,
    }
}

pub struct DamOracle {
    pub w: Vec<f64>,
    pub b: f64,
    pub f: Vec<f64>,
    pub objective: f64,
}

pub struct DamProblem<'a> {
    pub x: &'a [Vec<f64>],
    /// `preds[s][i]`
    pub preds: &'a [Vec<f64>],
    pub gammas: &'a [f64],
    pub theta: f64,
    pub eps: f64,
    pub c: f64,
}

impl DamProblem<'_> {
    pub fn objective(&self, w: &[f64], b: f64, f: &[f64]) -> f64 {
        let mut obj = 0.5 * dotp(w, w);
        for (i, xi) in self.x.iter().enumerate() {
            let r = f[i] - dotp(w, xi) - b;
            obj += self.c * (r.abs() - self.eps).max(0.0);
            for (g, p) in self.gammas.iter().zip(self.preds) {
                obj += 0.5 * self.theta * g * (f[i] - p[i]).powi(2);
            }
        }
        obj
    }

    /// ADMM on the split `r = f - Xw - b`, with the quadratic block solved
    /// exactly and the insensitive loss handled by its proximal map.
    pub fn solve(&self, rho: f64, iters: usize) -> DamOracle {
        let n = self.x.len();
        let d = self.x[0].len();
        let nv = d + 1 + n;
        // Residual operator: r = E u with u = (w, b, f).
        let e = DMatrix::from_fn(n, nv, |i, j| {
            if j < d {
                -self.x[i][j]
            } else if j == d {
                -1.0
            } else if j - d - 1 == i {
                1.0
            } else {
                0.0
            }
        });
        let gsum: f64 = self.gammas.iter().sum();
        let mut p = DMatrix::zeros(nv, nv);
        let mut lin = DVector::zeros(nv);
        for j in 0..d {
            p[(j, j)] = 1.0;
        }
        for i in 0..n {
            p[(d + 1 + i, d + 1 + i)] = self.theta * gsum;
            lin[d + 1 + i] = self.theta * self.gammas.iter().zip(self.preds).map(|(g, pr)| g * pr[i]).sum::<f64>();
        }
        let h = &p + e.transpose() * &e * rho;
        let h_inv = h.try_inverse().expect("positive definite system");
        let mut r = DVector::zeros(n);
        let mut mu = DVector::zeros(n);
        let mut u = DVector::zeros(nv);
        let k = self.c / rho;
        for _ in 0..iters {
            u = &h_inv * (&lin + e.transpose() * (&r - &mu) * rho);
            let v = &e * &u + &mu;
            r = v.map(|vi| {
                let a = vi.abs();
                if a <= self.eps {
                    vi
                } else if a <= self.eps + k {
                    self.eps * vi.signum()
                } else {
                    vi - k * vi.signum()
                }
            });
            mu += &e * &u - &r;
        }
        let w: Vec<f64> = u.rows(0, d).iter().copied().collect();
        let b = u[d];
        let f: Vec<f64> = u.rows(d + 1, n).iter().copied().collect();
        DamOracle {
            objective: self.objective(&w, b, &f),
            w,
            b,
            f,
        }
    }
}

/// Trapezoidal integral of `Phi(t) Phi(t)'` along the Grassmann geodesic from
/// span(ps) to span(pt).
pub fn geodesic_integral(ps: &DMatrix<f64>, pt: &DMatrix<f64>, steps: usize) -> DMatrix<f64> {
    let d = ps.nrows();
    let m = ps.transpose() * pt;
    let m_inv = m.clone().try_inverse().expect("bases not orthogonal");
    let proj = DMatrix::<f64>::identity(d, d) - ps * ps.transpose();
    let a = proj * pt * m_inv;
    let svd = a.svd(true, true);
    let q = svd.u.unwrap();
    let v = svd.v_t.unwrap().transpose();
    let theta: Vec<f64> = svd.singular_values.iter().map(|s| s.atan()).collect();
    let k = theta.len();
    let psv = ps * v;
    let phi = |t: f64| {
        let mut out = DMatrix::zeros(d, k);
        for j in 0..k {
            let col = psv.column(j) * (theta[j] * t).cos() + q.column(j) * (theta[j] * t).sin();
            out.set_column(j, &col);
        }
        out
    };
    let h = 1.0 / steps as f64;
    let mut g = DMatrix::zeros(d, d);
    for s in 0..=steps {
        let p = phi(s as f64 * h);
        let wgt = if s == 0 || s == steps { 0.5 } else { 1.0 };
        g += (&p * p.transpose()) * (wgt * h);
    }
    g
}

/// Random `d x k` matrix with orthonormal columns.
pub fn random_basis(d: usize, k: usize, seed: u64) -> DMatrix<f64> {
    use rand::{Rng, SeedableRng};
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let m = DMatrix::from_fn(d, k, |_, _| r.random::<f64>() - 0.5);
    m.qr().q()
}

/// Squared MMD between the uniform average of `subset` and the target mean
/// under a Gaussian kernel.
pub fn subset_mmd(xs: &[Vec<f64>], subset: &[usize], target: &[Vec<f64>], sigma: f64) -> f64 {
    let k = |a: &[f64], b: &[f64]| {
        let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
        (-d / (sigma * sigma)).exp()
    };
    let m = subset.len() as f64;
    let n = target.len() as f64;
    let mut v = 0.0;
    for &i in subset {
        for &j in subset {
            v += k(&xs[i], &xs[j]) / (m * m);
        }
        for t in target {
            v -= 2.0 * k(&xs[i], t) / (m * n);
        }
    }
    for a in target {
        for b in target {
            v += k(a, b) / (n * n);
        }
    }
    v
}

/// Accuracy (percent) of the nearest class mean.
pub fn nearest_centroid_accuracy(train: &Dataset, test: &Dataset) -> f64 {
    let groups = train.indices_by_class();
    let centroids: Vec<(usize, Vec<f64>)> = groups
        .iter()
        .map(|(c, idx)| {
            let mut m = vec![0.0; train.dim()];
            for &i in idx {
                for (mk, v) in m.iter_mut().zip(&train.samples()[i].features) {
                    *mk += v / idx.len() as f64;
                }
            }
            (*c, m)
        })
        .collect();
    let ok = test
        .samples()
        .iter()
        .filter(|s| {
            let best = centroids
                .iter()
                .min_by(|a, b| {
                    let da: f64 = a.1.iter().zip(&s.features).map(|(x, y)| (x - y).powi(2)).sum();
                    let db: f64 = b.1.iter().zip(&s.features).map(|(x, y)| (x - y).powi(2)).sum();
                    da.total_cmp(&db)
                })
                .unwrap();
            best.0 == s.class_label
        })
        .count();
    100.0 * ok as f64 / test.len() as f64
}

/// Relative difference with a floor on the scale.
pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-12)
}

/// Small Gaussian binary problem with overlapping classes.
pub fn gaussian_binary(n: usize, dim: usize, sep: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    use rand::{Rng, SeedableRng};
    use rand_distr::StandardNormal;
    let mut r = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        let v: Vec<f64> = (0..dim)
            .map(|k| r.sample::<f64, _>(StandardNormal) + if k == 0 { label * sep } else { 0.0 })
            .collect();
        x.push(v);
        y.push(label);
    }
    (x, y)
}
