use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::pca::SubspaceBasis;
use crate::{Error, Result};

/// The `k x k` map aligning a source basis onto a target basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentMatrix {
    pub a: DMatrix<f64>,
}

/// `A = Bs^T Bt`, the minimiser of `|Bs A - Bt|_F^2`.
pub fn sa_align(bs: &SubspaceBasis, bt: &SubspaceBasis) -> Result<AlignmentMatrix> {
    if bs.dim() != bt.dim() || bs.k() != bt.k() {
        return Err(Error::invalid(format!(
            "basis shapes differ: {}x{} vs {}x{}",
            bs.dim(),
            bs.k(),
            bt.dim(),
            bt.k()
        )));
    }
    Ok(AlignmentMatrix {
        a: bs.basis.transpose() * &bt.basis,
    })
}

/// `|Bs A - Bt|_F^2`.
pub fn sa_objective(bs: &SubspaceBasis, bt: &SubspaceBasis, a: &DMatrix<f64>) -> f64 {
    (&bs.basis * a - &bt.basis).norm_squared()
}

/// Source sample in aligned coordinates: `(x - o_s)^T Bs A`.
pub fn sa_map_source(bs: &SubspaceBasis, a: &AlignmentMatrix, x: &[f64]) -> Vec<f64> {
    let z = bs.project(x);
    (0..a.a.ncols())
        .map(|j| (0..z.len()).map(|i| z[i] * a.a[(i, j)]).sum())
        .collect()
}

/// Target sample in its own subspace coordinates: `(x - o_t)^T Bt`.
pub fn sa_map_target(bt: &SubspaceBasis, x: &[f64]) -> Vec<f64> {
    bt.project(x)
}
