use super::dcd::{self, Augmented, DcdSettings};
use super::{check_rows, LinearModel};
use crate::{Error, Result};

/// A trained binary machine plus solver diagnostics.
#[derive(Debug, Clone)]
pub struct SvmFit {
    pub model: LinearModel,
    pub primal: f64,
    /// Dual objective `sum(alpha) - 1/2 |w(alpha)|^2` at the last iterate.
    pub dual: f64,
    /// Dual variables, one per sample, in `[0, C]`.
    pub alpha: Vec<f64>,
    pub passes: usize,
    pub converged: bool,
}

impl SvmFit {
    pub fn relative_gap(&self) -> f64 {
        (self.primal - self.dual) / self.primal.abs().max(1e-12)
    }
}

pub fn svm_train_binary(x: &[Vec<f64>], y: &[f64], c: f64) -> Result<LinearModel> {
    Ok(svm_train_binary_with(x, y, c, DcdSettings::default(), &mut |_, _| {})?.model)
}

/// Trains with explicit solver settings; `observer(pass, primal)` sees the
/// incumbent primal objective after every pass.
pub fn svm_train_binary_with(
    x: &[Vec<f64>],
    y: &[f64],
    c: f64,
    settings: DcdSettings,
    observer: &mut dyn FnMut(usize, f64),
) -> Result<SvmFit> {
    let dim = check_rows(x)?;
    if y.len() != x.len() {
        return Err(Error::DimensionMismatch {
            expected: x.len(),
            found: y.len(),
        });
    }
    if !(c.is_finite() && c > 0.0) {
        return Err(Error::invalid(format!("C must be positive, got {c}")));
    }
    if y.iter().any(|&v| v != 1.0 && v != -1.0) {
        return Err(Error::invalid("binary labels must be +1 or -1"));
    }
    let pos = y.iter().filter(|&&v| v > 0.0).count();
    if pos == 0 || pos == y.len() {
        return Err(Error::DegenerateLabels(format!(
            "binary training needs both labels, got {pos} positive of {}",
            y.len()
        )));
    }
    let cost = vec![c; x.len()];
    let sol = dcd::solve(&Augmented(x), y, &cost, settings, observer);
    let mut weights = sol.w;
    let offset = weights.pop().expect("augmented weight vector");
    debug_assert_eq!(weights.len(), dim);
    Ok(SvmFit {
        model: LinearModel {
            weights,
            offset,
            trained_c: c,
        },
        primal: sol.primal,
        dual: sol.dual,
        alpha: sol.alpha,
        passes: sol.passes,
        converged: sol.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_max_margin() {
        // With the augmented offset the problem is min 1/2(w^2 + b^2) subject to
        // w - b >= 1 and w + b >= 1, solved by w = 1, b = 0.
        let m = svm_train_binary(&[vec![-1.0], vec![1.0]], &[-1.0, 1.0], 100.0).unwrap();
        assert!((m.weights[0] - 1.0).abs() < 1e-2);
        assert!(m.offset.abs() < 1e-2);
        assert!((m.predict_margin(&[1.0]).unwrap() - 1.0).abs() < 1e-2);
        assert!((m.predict_margin(&[-1.0]).unwrap() + 1.0).abs() < 1e-2);
    }

    #[test]
    fn symmetric_data_zero_offset() {
        let x = vec![vec![1.0, 2.0], vec![2.0, 0.5], vec![-1.0, -2.0], vec![-2.0, -0.5], vec![0.3, -0.1], vec![-0.3, 0.1]];
        let y = vec![1.0, 1.0, -1.0, -1.0, -1.0, 1.0];
        let m = svm_train_binary(&x, &y, 10.0).unwrap();
        assert!(m.offset.abs() < 1e-6, "offset {}", m.offset);
    }

    #[test]
    fn single_class_rejected() {
        let err = svm_train_binary(&[vec![0.0], vec![1.0]], &[1.0, 1.0], 1.0).unwrap_err();
        assert!(matches!(err, Error::DegenerateLabels(_)));
    }

    #[test]
    fn deterministic_and_monotone() {
        let x: Vec<Vec<f64>> = (0..40).map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()]).collect();
        let y: Vec<f64> = x.iter().map(|r| if r[0] + 0.3 * r[1] > 0.1 { 1.0 } else { -1.0 }).collect();
        let mut trace = Vec::new();
        let a = svm_train_binary_with(&x, &y, 5.0, DcdSettings::default(), &mut |_, p| trace.push(p)).unwrap();
        let b = svm_train_binary_with(&x, &y, 5.0, DcdSettings::default(), &mut |_, _| {}).unwrap();
        assert_eq!(a.model, b.model);
        assert!(trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(a.converged);
        assert!(a.relative_gap() <= 1e-3, "gap {}", a.relative_gap());
    }
}
