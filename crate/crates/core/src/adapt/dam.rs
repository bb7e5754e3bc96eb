//! Domain adaptation machine.
//!
//! The target decision function `w.x + b` is fitted, through an
//! epsilon-insensitive loss, to virtual labels `f` that are in turn pulled
//! towards the source predictions (and towards the true labels of any labeled
//! target samples):
//!
//! ```text
//! min 1/2 |w|^2 + C sum_i (xi_i + xi*_i)
//!     + theta/2 (|f_l - y_l|^2 + sum_s gamma_s |f_u - f_u^s|^2)
//! s.t. |w.x_i + b - f_i| <= eps + slack
//! ```
//!
//! For fixed `(w, b)` each `f_i` has a closed-form minimiser, leaving a
//! smooth, convex, piecewise quadratic function of `(w, b)` that is minimised
//! by a semismooth Newton method with conjugate-gradient steps. The offset is
//! not regularised.

use serde::{Deserialize, Serialize};

use crate::linalg::{dot, sq_norm};
use crate::linear::{argmax, LinearModel, OvaModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamConfig {
    pub theta: f64,
    pub gammas: Vec<f64>,
    pub epsilon: f64,
    pub c: f64,
}

impl DamConfig {
    /// Single source with `theta = 1`, `gamma = 0.5`, `eps = 0.1`.
    pub fn single_source(c: f64) -> Self {
        DamConfig {
            theta: 1.0,
            gammas: vec![0.5],
            epsilon: 0.1,
            c,
        }
    }

    fn validate(&self, n_sources: usize) -> Result<()> {
        if !(self.theta.is_finite() && self.theta > 0.0) {
            return Err(Error::invalid("theta must be positive"));
        }
        if self.gammas.len() != n_sources {
            return Err(Error::invalid(format!(
                "{} gammas given for {n_sources} sources",
                self.gammas.len()
            )));
        }
        if self.gammas.iter().any(|g| !(g.is_finite() && *g >= 0.0)) || self.gammas.iter().all(|g| *g == 0.0) {
            return Err(Error::invalid("gammas must be non-negative with at least one positive"));
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon must be non-negative"));
        }
        if !(self.c.is_finite() && self.c >= 0.0) {
            return Err(Error::invalid("C must be non-negative"));
        }
        Ok(())
    }
}

/// Labeled target samples for the semi-supervised variant.
#[derive(Debug, Clone, Copy)]
pub struct LabeledTarget<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamFit {
    pub model: LinearModel,
    /// Virtual labels of the unlabeled target samples.
    pub f_unlabeled: Vec<f64>,
    pub f_labeled: Vec<f64>,
    pub slack_sum: f64,
    pub objective: f64,
    /// Objective after every Newton step, starting at the initial point.
    pub trace: Vec<f64>,
    /// Gradient norm at termination.
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Per-sample term: weight `a` of the quadratic pull, anchor `m`, and the
/// constant left over from combining several anchors.
#[derive(Debug, Clone, Copy)]
struct Term {
    a: f64,
    m: f64,
    constant: f64,
}

impl Term {
    fn from_sources(theta: f64, gammas: &[f64], preds: &[f64]) -> Term {
        let q: f64 = gammas.iter().sum();
        let m = gammas.iter().zip(preds).map(|(g, p)| g * p).sum::<f64>() / q;
        let constant = 0.5 * theta * gammas.iter().zip(preds).map(|(g, p)| g * (p - m) * (p - m)).sum::<f64>();
        Term { a: theta * q, m, constant }
    }

    /// Optimal virtual label for the prediction `p`.
    fn f(&self, c: f64, eps: f64, p: f64) -> f64 {
        let r = p - self.m;
        let u = r.abs() - eps;
        if u <= 0.0 {
            self.m
        } else {
            self.m + r.signum() * u.min(c / self.a)
        }
    }

    /// Value, derivative and generalized second derivative in `p`.
    fn eval(&self, c: f64, eps: f64, p: f64) -> (f64, f64, f64) {
        let r = p - self.m;
        let u = r.abs() - eps;
        if u <= 0.0 {
            (0.0, 0.0, 0.0)
        } else if u <= c / self.a {
            (0.5 * self.a * u * u, self.a * u * r.signum(), self.a)
        } else {
            (c * u - c * c / (2.0 * self.a), c * r.signum(), 0.0)
        }
    }
}

struct Problem<'a> {
    x: Vec<&'a [f64]>,
    terms: Vec<Term>,
    c: f64,
    eps: f64,
    dim: usize,
}

impl Problem<'_> {
    fn value_grad(&self, v: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        let d = self.dim;
        let mut f = 0.5 * sq_norm(&v[..d]);
        let mut g = v.to_vec();
        g[d] = 0.0;
        let mut h = Vec::with_capacity(self.x.len());
        for (x, t) in self.x.iter().zip(&self.terms) {
            let p = dot(x, &v[..d]) + v[d];
            let (val, der, sec) = t.eval(self.c, self.eps, p);
            f += val + t.constant;
            for (gj, xj) in g[..d].iter_mut().zip(x.iter()) {
                *gj += der * xj;
            }
            g[d] += der;
            h.push(sec);
        }
        (f, g, h)
    }

    fn hess_vec(&self, h: &[f64], s: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut out = s.to_vec();
        out[d] = 1e-10 * s[d];
        for (x, &hi) in self.x.iter().zip(h) {
            if hi == 0.0 {
                continue;
            }
            let xs = hi * (dot(x, &s[..d]) + s[d]);
            for (o, xj) in out[..d].iter_mut().zip(x.iter()) {
                *o += xs * xj;
            }
            out[d] += xs;
        }
        out
    }
}

fn conjugate_gradient(p: &Problem<'_>, h: &[f64], rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut x = vec![0.0; n];
    let mut r = rhs.to_vec();
    let mut dir = r.clone();
    let mut rr = sq_norm(&r);
    let stop = 1e-24f64.max(1e-20 * rr);
    for _ in 0..(2 * n + 20) {
        if rr <= stop {
            break;
        }
        let ad = p.hess_vec(h, &dir);
        let dad = dot(&dir, &ad);
        if dad <= 0.0 {
            break;
        }
        let step = rr / dad;
        for i in 0..n {
            x[i] += step * dir[i];
            r[i] -= step * ad[i];
        }
        let next = sq_norm(&r);
        let beta = next / rr;
        rr = next;
        for i in 0..n {
            dir[i] = r[i] + beta * dir[i];
        }
    }
    x
}

/// Trains the target model from source predictions on the target samples.
///
/// `source_preds[s][i]` is the decision value of source model `s` on
/// `target[i]`.
pub fn dam_train_from_predictions(
    target: &[Vec<f64>],
    source_preds: &[Vec<f64>],
    labeled: Option<LabeledTarget<'_>>,
    cfg: &DamConfig,
) -> Result<DamFit> {
    if target.is_empty() {
        return Err(Error::Empty("target set".into()));
    }
    cfg.validate(source_preds.len())?;
    let dim = crate::linear::check_rows(target)?;
    if source_preds.iter().any(|p| p.len() != target.len()) {
        return Err(Error::invalid("one source prediction per target sample is required"));
    }
    let mut x: Vec<&[f64]> = target.iter().map(Vec::as_slice).collect();
    let mut terms: Vec<Term> = (0..target.len())
        .map(|i| {
            let preds: Vec<f64> = source_preds.iter().map(|p| p[i]).collect();
            Term::from_sources(cfg.theta, &cfg.gammas, &preds)
        })
        .collect();
    if let Some(l) = labeled {
        if l.x.len() != l.y.len() {
            return Err(Error::invalid("labeled target samples and labels differ in count"));
        }
        for (xi, &yi) in l.x.iter().zip(l.y) {
            if xi.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, found: xi.len() });
            }
            x.push(xi);
            terms.push(Term { a: cfg.theta, m: yi, constant: 0.0 });
        }
    }
    let prob = Problem { x, terms, c: cfg.c, eps: cfg.epsilon, dim };

    // Start from the constant predictor at the mean anchor.
    let mut v = vec![0.0; dim + 1];
    v[dim] = prob.terms.iter().map(|t| t.m).sum::<f64>() / prob.terms.len() as f64;
    let (mut fv, mut g, mut h) = prob.value_grad(&v);
    let mut trace = vec![fv];
    let mut iterations = 0;
    let scale = 1.0 + fv.abs();
    while iterations < 500 {
        if sq_norm(&g).sqrt() <= 1e-10 * scale {
            break;
        }
        iterations += 1;
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut step = conjugate_gradient(&prob, &h, &neg);
        let mut slope = dot(&g, &step);
        if !(slope < 0.0) {
            step = neg;
            slope = -sq_norm(&g);
        }
        let mut t = 1.0;
        let mut accepted = false;
        for _ in 0..60 {
            let cand: Vec<f64> = v.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let (fc, gc, hc) = prob.value_grad(&cand);
            if fc <= fv + 1e-4 * t * slope {
                accepted = fc < fv || sq_norm(&gc) < sq_norm(&g);
                if accepted {
                    v = cand;
                    fv = fc;
                    g = gc;
                    h = hc;
                }
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            break;
        }
        trace.push(fv);
    }
    let n_u = target.len();
    let preds: Vec<f64> = prob.x.iter().map(|x| dot(x, &v[..dim]) + v[dim]).collect();
    let f: Vec<f64> = prob
        .terms
        .iter()
        .zip(&preds)
        .map(|(t, &p)| t.f(cfg.c, cfg.epsilon, p))
        .collect();
    let slack_sum = f
        .iter()
        .zip(&preds)
        .map(|(fi, p)| ((p - fi).abs() - cfg.epsilon).max(0.0))
        .sum();
    Ok(DamFit {
        model: LinearModel {
            weights: v[..dim].to_vec(),
            offset: v[dim],
            trained_c: cfg.c,
        },
        f_unlabeled: f[..n_u].to_vec(),
        f_labeled: f[n_u..].to_vec(),
        slack_sum,
        objective: fv,
        kkt_residual: sq_norm(&g).sqrt(),
        trace,
        iterations,
    })
}

/// [`dam_train_from_predictions`] with the source predictions computed from
/// trained source models.
pub fn dam_train(
    sources: &[LinearModel],
    target: &[Vec<f64>],
    labeled: Option<LabeledTarget<'_>>,
    cfg: &DamConfig,
) -> Result<DamFit> {
    let preds = sources
        .iter()
        .map(|m| target.iter().map(|x| m.predict_margin(x)).collect::<Result<Vec<f64>>>())
        .collect::<Result<Vec<_>>>()?;
    dam_train_from_predictions(target, &preds, labeled, cfg)
}

/// Objective at an arbitrary `(w, b, f)`, with the slacks at their minimum.
pub fn dam_objective(
    target: &[Vec<f64>],
    source_preds: &[Vec<f64>],
    labeled: Option<LabeledTarget<'_>>,
    cfg: &DamConfig,
    model: &LinearModel,
    f_unlabeled: &[f64],
    f_labeled: &[f64],
) -> Result<f64> {
    let mut obj = 0.5 * sq_norm(&model.weights);
    let hinge = |x: &[f64], f: f64| -> Result<f64> { Ok(((model.predict_margin(x)? - f).abs() - cfg.epsilon).max(0.0)) };
    for (i, x) in target.iter().enumerate() {
        obj += cfg.c * hinge(x, f_unlabeled[i])?;
        for (g, p) in cfg.gammas.iter().zip(source_preds) {
            obj += 0.5 * cfg.theta * g * (f_unlabeled[i] - p[i]).powi(2);
        }
    }
    if let Some(l) = labeled {
        for ((x, y), f) in l.x.iter().zip(l.y).zip(f_labeled) {
            obj += cfg.c * hinge(x, *f)? + 0.5 * cfg.theta * (f - y).powi(2);
        }
    }
    Ok(obj)
}

/// One DAM per class on one-vs-all source margins; predicts the argmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamOva {
    pub classes: Vec<usize>,
    pub fits: Vec<DamFit>,
}

impl DamOva {
    pub fn to_ova(&self) -> OvaModel {
        OvaModel {
            classes: self.classes.clone(),
            models: self.fits.iter().map(|f| f.model.clone()).collect(),
        }
    }

    pub fn predict(&self, x: &[f64]) -> Result<usize> {
        let m = self
            .fits
            .iter()
            .map(|f| f.model.predict_margin(x))
            .collect::<Result<Vec<f64>>>()?;
        Ok(self.classes[argmax(&m)])
    }
}

/// Sources must share their class list.
pub fn dam_train_ova(sources: &[OvaModel], target: &[Vec<f64>], cfg: &DamConfig) -> Result<DamOva> {
    let first = sources.first().ok_or_else(|| Error::invalid("no source models"))?;
    if sources.iter().any(|s| s.classes != first.classes) {
        return Err(Error::invalid("source models disagree on the class list"));
    }
    use rayon::prelude::*;
    let fits = (0..first.classes.len())
        .into_par_iter()
        .map(|k| {
            let heads: Vec<LinearModel> = sources.iter().map(|s| s.models[k].clone()).collect();
            dam_train(&heads, target, None, cfg)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DamOva {
        classes: first.classes.clone(),
        fits,
    })
}
