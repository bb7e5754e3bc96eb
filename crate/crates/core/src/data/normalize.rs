use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{Error, Result};

/// Scales `v` to unit Euclidean norm. The zero vector is returned unchanged.
pub fn l2_normalize(v: &[f64]) -> Result<Vec<f64>> {
    if v.is_empty() {
        return Err(Error::invalid("cannot normalize an empty vector"));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("non-finite entry in vector"));
    }
    // Scale by the max magnitude first so huge or tiny entries do not overflow.
    let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if scale == 0.0 {
        return Ok(v.to_vec());
    }
    let norm = scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt();
    Ok(v.iter().map(|x| x / norm).collect())
}

pub fn l2_normalize_dataset(ds: &Dataset) -> Result<Dataset> {
    ds.map_features(|v| l2_normalize(v).expect("dataset features are finite and non-empty"))
}

/// Per-dimension mean and population standard deviation of a training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZScoreStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn zscore_fit(train: &Dataset) -> Result<ZScoreStats> {
    if train.is_empty() {
        return Err(Error::Empty(format!("z-score fit on empty dataset `{}`", train.name())));
    }
    let rows = train.features();
    let mean = crate::linalg::column_mean(&rows);
    let n = rows.len() as f64;
    let mut var = vec![0.0; train.dim()];
    for r in &rows {
        for (k, v) in r.iter().enumerate() {
            var[k] += (v - mean[k]).powi(2);
        }
    }
    let std = var.into_iter().map(|s| (s / n).sqrt()).collect();
    Ok(ZScoreStats { mean, std })
}

impl ZScoreStats {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(v_k - mean_k) / std_k`, with a zero std replaced by 1.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(v.iter()
            .zip(self.mean.iter().zip(&self.std))
            .map(|(x, (m, s))| (x - m) / if *s > 0.0 { *s } else { 1.0 })
            .collect())
    }

    pub fn apply_dataset(&self, ds: &Dataset) -> Result<Dataset> {
        if ds.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: ds.dim(),
            });
        }
        ds.map_features(|v| self.apply(v).expect("dimension checked"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_four_five() {
        let n = l2_normalize(&[3.0, 4.0]).unwrap();
        assert!((n[0] - 0.6).abs() < 1e-15 && (n[1] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn zero_vector_unchanged() {
        assert_eq!(l2_normalize(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn unit_vector_fixed_point() {
        let u = [0.6, 0.0, -0.8];
        let n = l2_normalize(&u).unwrap();
        for (a, b) in n.iter().zip(&u) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn non_finite_rejected() {
        assert!(l2_normalize(&[1.0, f64::INFINITY]).is_err());
        assert!(l2_normalize(&[]).is_err());
    }

    #[test]
    fn zscore_two_points() {
        let ds = Dataset::from_parts("t", 0, vec![vec![0.0], vec![2.0]], vec![0, 0]).unwrap();
        let st = zscore_fit(&ds).unwrap();
        assert_eq!(st.mean, vec![1.0]);
        assert_eq!(st.std, vec![1.0]);
        assert_eq!(st.apply(&[2.0]).unwrap(), vec![1.0]);
        assert_eq!(st.apply(&st.mean.clone()).unwrap(), vec![0.0]);
    }

    #[test]
    fn zscore_constant_dimension() {
        let ds = Dataset::from_parts("t", 0, vec![vec![5.0], vec![5.0]], vec![0, 1]).unwrap();
        let st = zscore_fit(&ds).unwrap();
        assert_eq!(st.apply(&[5.0]).unwrap(), vec![0.0]);
        assert!(st.apply(&[5.0, 1.0]).is_err());
    }

    proptest! {
        #[test]
        fn l2_norm_is_zero_or_one(v in proptest::collection::vec(-1e6f64..1e6, 1..20)) {
            let n = l2_normalize(&v).unwrap();
            let norm = n.iter().map(|x| x * x).sum::<f64>().sqrt();
            prop_assert!(norm == 0.0 || (norm - 1.0).abs() <= 1e-12);
        }

        #[test]
        fn zscore_centers_fit_set(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 2..30)) {
            let labels = vec![0; rows.len()];
            let ds = Dataset::from_parts("p", 0, rows, labels).unwrap();
            let st = zscore_fit(&ds).unwrap();
            let z = st.apply_dataset(&ds).unwrap().features();
            let m = crate::linalg::column_mean(&z);
            for (k, mk) in m.iter().enumerate() {
                prop_assert!(mk.abs() <= 1e-9);
                if st.std[k] > 1e-6 {
                    let col: Vec<f64> = z.iter().map(|r| r[k]).collect();
                    prop_assert!((crate::linalg::population_std(&col) - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
