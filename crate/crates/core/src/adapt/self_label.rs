use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::linalg::mean;
use crate::linear::{argmax, ova_train, OvaModel};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfLabelResult {
    pub model: OvaModel,
    /// Target recognition rate (percent) of the model after each iteration,
    /// starting with the source-only model. Empty without target labels.
    pub trace: Vec<f64>,
    /// Number of target samples added at each completed iteration.
    pub added: Vec<usize>,
    /// Pseudo-labeled target indices in the order they were added.
    pub selected: Vec<(usize, usize)>,
}

/// Iterative self-labeling of an unlabeled target.
///
/// Every iteration scores the remaining pool, keeps samples whose top margin
/// exceeds the pool's mean top margin, ranks them within their predicted
/// class by the gap between the two largest margins, and moves up to
/// `per_class` of them per class into the training set.
pub fn self_label_train(
    source: &Dataset,
    target: &[Vec<f64>],
    target_labels: Option<&[usize]>,
    iterations: usize,
    per_class: usize,
    c: f64,
) -> Result<SelfLabelResult> {
    if per_class == 0 {
        return Err(Error::invalid("per_class must be at least 1"));
    }
    if let Some(l) = target_labels {
        if l.len() != target.len() {
            return Err(Error::DimensionMismatch { expected: target.len(), found: l.len() });
        }
    }
    let mut x = source.features();
    let mut y = source.labels();
    let mut model = ova_train(&x, &y, c)?;
    let accuracy = |m: &OvaModel| -> Result<Option<f64>> {
        match target_labels {
            Some(l) if !target.is_empty() => {
                let p = m.predict_all(target)?;
                Ok(Some(100.0 * p.iter().zip(l).filter(|(a, b)| a == b).count() as f64 / l.len() as f64))
            }
            _ => Ok(None),
        }
    };
    let mut trace = Vec::new();
    trace.extend(accuracy(&model)?);
    let mut pool: Vec<usize> = (0..target.len()).collect();
    let mut added = Vec::new();
    let mut selected = Vec::new();
    for _ in 0..iterations {
        if pool.is_empty() {
            break;
        }
        let scored: Vec<(usize, usize, f64, f64)> = pool
            .iter()
            .map(|&i| {
                let m = model.margins(&target[i])?;
                let k = argmax(&m);
                let top = m[k];
                let second = m
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != k)
                    .map(|(_, v)| *v)
                    .fold(f64::NEG_INFINITY, f64::max);
                Ok((i, model.classes[k], top, top - second))
            })
            .collect::<Result<_>>()?;
        let avg = mean(&scored.iter().map(|s| s.2).collect::<Vec<_>>());
        let mut by_class: BTreeMap<usize, Vec<(usize, f64)>> = BTreeMap::new();
        for &(i, cl, top, gap) in &scored {
            if top > avg {
                by_class.entry(cl).or_default().push((i, gap));
            }
        }
        let mut chosen = Vec::new();
        for (cl, mut cands) in by_class {
            cands.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            for (i, _) in cands.into_iter().take(per_class) {
                chosen.push((i, cl));
            }
        }
        if chosen.is_empty() {
            break;
        }
        for &(i, cl) in &chosen {
            x.push(target[i].clone());
            y.push(cl);
        }
        pool.retain(|i| !chosen.iter().any(|(j, _)| j == i));
        added.push(chosen.len());
        selected.extend(chosen);
        model = ova_train(&x, &y, c)?;
        trace.extend(accuracy(&model)?);
    }
    Ok(SelfLabelResult {
        model,
        trace,
        added,
        selected,
    })
}
