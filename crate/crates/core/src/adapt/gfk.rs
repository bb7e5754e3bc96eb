//! Geodesic flow kernel.
//!
//! With `Ps^T Pt = U1 cos(T) V^T` and `Rs^T Pt = -U2 sin(T) V^T` (`Rs` an
//! orthonormal complement of `Ps`), the geodesic from `Ps` to `Pt` is
//! `Phi(t) = Ps U1 cos(T t) - Rs U2 sin(T t)` and
//!
//! ```text
//! G = [Ps U1, Rs U2] [[L1, L2], [L2, L3]] [Ps U1, Rs U2]^T
//! L1 = 1/2 (1 + sin 2T / 2T),  L2 = 1/2 (cos 2T - 1) / 2T,  L3 = 1/2 (1 - sin 2T / 2T)
//! ```

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::pca::SubspaceBasis;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GfkMatrix {
    pub g: DMatrix<f64>,
}

impl GfkMatrix {
    pub fn identity(d: usize) -> Self {
        GfkMatrix {
            g: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// `(a - b)^T G (a - b)`, clamped at zero.
    pub fn sq_dist(&self, a: &[f64], b: &[f64]) -> f64 {
        let d = DVector::from_iterator(a.len(), a.iter().zip(b).map(|(x, y)| x - y));
        (d.transpose() * &self.g * &d)[(0, 0)].max(0.0)
    }

    /// Symmetric square root, so that `|G^{1/2} x|^2 = x^T G x`.
    pub fn sqrt(&self) -> DMatrix<f64> {
        let eig = self.g.clone().symmetric_eigen();
        let s = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        &eig.eigenvectors * DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose()
    }
}

/// Orthonormal complement of the columns of `p` (QR of `[p | I]`).
pub fn orthonormal_complement(p: &DMatrix<f64>) -> DMatrix<f64> {
    let (d, k) = p.shape();
    let mut m = DMatrix::zeros(d, k + d);
    m.columns_mut(0, k).copy_from(p);
    m.columns_mut(k, d).fill_with_identity();
    let q = m.qr().q();
    q.columns(k, d - k).into_owned()
}

fn coefficients(theta: f64) -> (f64, f64, f64) {
    let x = 2.0 * theta;
    let (sinc, cosc) = if x < 1e-4 {
        (1.0 - x * x / 6.0 + x.powi(4) / 120.0, -x / 2.0 + x.powi(3) / 24.0)
    } else {
        (x.sin() / x, (x.cos() - 1.0) / x)
    };
    (0.5 * (1.0 + sinc), 0.5 * cosc, 0.5 * (1.0 - sinc))
}

pub fn gfk_compute(bs: &SubspaceBasis, bt: &SubspaceBasis) -> Result<GfkMatrix> {
    let (d, k) = bs.basis.shape();
    if bt.basis.shape() != (d, k) {
        return Err(Error::invalid("source and target bases must have the same shape"));
    }
    if k > d - k {
        return Err(Error::invalid(format!(
            "subspace dimension {k} leaves no room for a complement in dimension {d} (need k <= d/2)"
        )));
    }
    let ps = &bs.basis;
    let pt = &bt.basis;
    let rs = orthonormal_complement(ps);
    let a = ps.transpose() * pt;
    let svd = a.svd(true, true);
    let u1 = svd.u.ok_or_else(|| Error::invalid("SVD did not converge"))?;
    let v = svd.v_t.ok_or_else(|| Error::invalid("SVD did not converge"))?.transpose();
    let gamma = svd.singular_values;
    let bv = rs.transpose() * pt * &v;
    let mut u2 = DMatrix::zeros(d - k, k);
    let mut l = DMatrix::zeros(2 * k, 2 * k);
    for i in 0..k {
        let s = bv.column(i).norm();
        let theta = s.atan2(gamma[i]);
        if theta.sin() >= 1e-10 {
            u2.set_column(i, &(-bv.column(i) / theta.sin()));
        }
        let (l1, l2, l3) = coefficients(theta);
        l[(i, i)] = l1;
        l[(i, k + i)] = l2;
        l[(k + i, i)] = l2;
        l[(k + i, k + i)] = l3;
    }
    let mut omega = DMatrix::zeros(d, 2 * k);
    omega.columns_mut(0, k).copy_from(&(ps * u1));
    omega.columns_mut(k, k).copy_from(&(&rs * u2));
    let g = &omega * l * omega.transpose();
    let g = (&g + g.transpose()) * 0.5;
    Ok(GfkMatrix { g })
}

/// `exp(-(xi - xj)^T G (xi - xj) / sigma^2)`.
pub fn gfk_kernel_eval(g: &GfkMatrix, xi: &[f64], xj: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::invalid(format!("bandwidth must be positive, got {sigma}")));
    }
    if xi.len() != g.dim() || xj.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            found: if xi.len() != g.dim() { xi.len() } else { xj.len() },
        });
    }
    Ok((-g.sq_dist(xi, xj) / (sigma * sigma)).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn b(d: usize, cols: &[usize]) -> SubspaceBasis {
        SubspaceBasis {
            basis: DMatrix::from_fn(d, cols.len(), |i, j| if i == cols[j] { 1.0 } else { 0.0 }),
            origin: vec![0.0; d],
        }
    }

    #[test]
    fn same_subspace_gives_projector() {
        let p = b(4, &[0, 2]);
        let g = gfk_compute(&p, &p).unwrap();
        let proj = &p.basis * p.basis.transpose();
        assert!((g.g - proj).norm() < 1e-12);
    }

    #[test]
    fn orthogonal_pair_is_half_projector_sum() {
        // theta = pi/2: L1 = L3 = 1/2, L2 = -1/pi.
        let g = gfk_compute(&b(2, &[0]), &b(2, &[1])).unwrap().g;
        assert!((g[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((g[(1, 1)] - 0.5).abs() < 1e-12);
        assert!((g[(0, 1)].abs() - 1.0 / std::f64::consts::PI).abs() < 1e-12);
    }

    #[test]
    fn kernel_values() {
        let g = GfkMatrix::identity(2);
        assert_eq!(gfk_kernel_eval(&g, &[1.0, 2.0], &[1.0, 2.0], 0.3).unwrap(), 1.0);
        let v = gfk_kernel_eval(&g, &[0.0, 0.0], &[1.0, 1.0], 1.0).unwrap();
        assert!((v - (-2.0f64).exp()).abs() < 1e-15);
        assert!(gfk_kernel_eval(&g, &[0.0, 0.0], &[1.0, 1.0], 2.0).unwrap() > v);
        assert!(gfk_kernel_eval(&g, &[0.0, 0.0], &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn too_large_k() {
        assert!(gfk_compute(&b(3, &[0, 1]), &b(3, &[1, 2])).is_err());
    }

    #[test]
    fn sqrt_squares_back() {
        let g = gfk_compute(&b(4, &[0]), &b(4, &[1])).unwrap();
        let r = g.sqrt();
        assert!((&r * &r - &g.g).norm() < 1e-10);
    }
}
