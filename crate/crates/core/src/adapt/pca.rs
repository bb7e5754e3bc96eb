use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::linalg::column_mean;
use crate::{Error, Result};

/// A column-orthonormal `d x k` basis together with the mean it was centred on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    pub basis: DMatrix<f64>,
    pub origin: Vec<f64>,
}

impl SubspaceBasis {
    pub fn dim(&self) -> usize {
        self.basis.nrows()
    }

    pub fn k(&self) -> usize {
        self.basis.ncols()
    }

    /// The first `k` columns.
    pub fn truncate(&self, k: usize) -> SubspaceBasis {
        SubspaceBasis {
            basis: self.basis.columns(0, k.min(self.k())).into_owned(),
            origin: self.origin.clone(),
        }
    }

    /// Coordinates `B^T (x - origin)`.
    pub fn project(&self, x: &[f64]) -> Vec<f64> {
        (0..self.k())
            .map(|j| {
                self.basis
                    .column(j)
                    .iter()
                    .zip(x.iter().zip(&self.origin))
                    .map(|(b, (xi, oi))| b * (xi - oi))
                    .sum()
            })
            .collect()
    }
}

/// Top-`k` principal directions of the mean-centred samples, by descending
/// variance. Each column is signed so its largest-magnitude entry is positive.
pub fn pca_subspace(x: &[Vec<f64>], k: usize) -> Result<SubspaceBasis> {
    if x.len() < 2 {
        return Err(Error::invalid("PCA needs at least two samples"));
    }
    let d = crate::linear::check_rows(x)?;
    if k == 0 || k > d {
        return Err(Error::invalid(format!("subspace dimension {k} outside 1..={d}")));
    }
    let origin = column_mean(x);
    let centred = DMatrix::from_fn(x.len(), d, |i, j| x[i][j] - origin[j]);
    let svd = centred.svd(false, true);
    let vt = svd.v_t.ok_or_else(|| Error::invalid("SVD did not converge"))?;
    let sv = svd.singular_values;
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]).then(a.cmp(&b)));
    let top = order.first().map_or(0.0, |&i| sv[i]);
    let achievable = if top > 0.0 {
        order.iter().filter(|&&i| sv[i] > 1e-9 * top).count()
    } else {
        0
    };
    if k > achievable {
        return Err(Error::RankDeficient {
            requested: k,
            achievable,
        });
    }
    let mut basis = DMatrix::zeros(d, k);
    for (j, &src) in order.iter().take(k).enumerate() {
        let row = vt.row(src);
        let mut pivot = 0;
        for t in 1..d {
            if row[t].abs() > row[pivot].abs() {
                pivot = t;
            }
        }
        let s = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for t in 0..d {
            basis[(t, j)] = s * row[t];
        }
    }
    Ok(SubspaceBasis { basis, origin })
}

/// Cosines of the principal angles between two column spaces, descending.
pub fn principal_cosines(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    let m = a.transpose() * b;
    let mut s: Vec<f64> = m.singular_values().iter().map(|v| v.clamp(0.0, 1.0)).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Sine of the largest principal angle between two subspaces of equal dimension.
pub fn largest_angle_sine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let c = principal_cosines(a, b).last().copied().unwrap_or(1.0);
    (1.0 - c * c).max(0.0).sqrt()
}

/// Subspace-disagreement choice of dimensionality.
///
/// For `k = 1..=d_max`, `D(k) = (sin a_k + sin b_k) / 2` where `a_k` (`b_k`) is
/// the largest principal angle between the source (target) PCA subspace and
/// the PCA subspace of the pooled data. Returns the first `k` with `D(k)`
/// reaching 1, or `d_max` when none does.
pub fn subspace_disagreement_dim(xs: &[Vec<f64>], xt: &[Vec<f64>], d_max: usize) -> Result<usize> {
    if d_max == 0 {
        return Err(Error::invalid("d_max must be at least 1"));
    }
    let pooled: Vec<Vec<f64>> = xs.iter().chain(xt).cloned().collect();
    let ps = pca_subspace(xs, d_max)?;
    let pt = pca_subspace(xt, d_max)?;
    let pu = pca_subspace(&pooled, d_max)?;
    for k in 1..=d_max {
        let s = ps.basis.columns(0, k).into_owned();
        let t = pt.basis.columns(0, k).into_owned();
        let u = pu.basis.columns(0, k).into_owned();
        let dk = 0.5 * (largest_angle_sine(&s, &u) + largest_angle_sine(&t, &u));
        if dk >= 1.0 - 1e-9 {
            return Ok(k);
        }
    }
    Ok(d_max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_direction() {
        let x: Vec<Vec<f64>> = (0..5).map(|t| vec![t as f64, t as f64]).collect();
        let b = pca_subspace(&x, 1).unwrap();
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((b.basis[(0, 0)] - r).abs() < 1e-12 && (b.basis[(1, 0)] - r).abs() < 1e-12);
        assert!(matches!(pca_subspace(&x, 2), Err(Error::RankDeficient { requested: 2, achievable: 1 })));
    }

    #[test]
    fn sign_and_order() {
        let x = vec![
            vec![-3.0, 0.0, 0.1],
            vec![3.0, 0.0, -0.1],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -1.0, 0.0],
        ];
        let b = pca_subspace(&x, 2).unwrap();
        assert!(b.basis[(0, 0)] > 0.99);
        assert!(b.basis[(1, 1)] > 0.99);
        let btb = b.basis.transpose() * &b.basis;
        assert!((btb - DMatrix::identity(2, 2)).norm() < 1e-10);
    }

    #[test]
    fn disagreement_orthogonal_example() {
        // Pooled variance along e3 exceeds that along e1 or e2.
        let c = 0.9;
        let xs = vec![vec![1.0, 0.0, 0.0], vec![-1.0, 0.0, 0.0], vec![0.0, 0.0, c], vec![0.0, 0.0, -c]];
        let xt = vec![vec![0.0, 1.0, 0.0], vec![0.0, -1.0, 0.0], vec![0.0, 0.0, c], vec![0.0, 0.0, -c]];
        assert_eq!(subspace_disagreement_dim(&xs, &xt, 2).unwrap(), 1);
        assert_eq!(subspace_disagreement_dim(&xt, &xs, 2).unwrap(), 1);
    }

    #[test]
    fn identical_sets_fall_back() {
        let x: Vec<Vec<f64>> = (0..12)
            .map(|i| {
                let t = i as f64;
                vec![(t * 0.7).sin() * 3.0, (t * 1.3).cos() * 2.0, (t * 0.2).sin()]
            })
            .collect();
        assert_eq!(subspace_disagreement_dim(&x, &x, 2).unwrap(), 2);
    }
}
