use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `100 (self - mean_others) / self`.
pub fn percent_drop(self_pct: f64, mean_others_pct: f64) -> Result<f64> {
    if !(self_pct > 0.0) {
        return Err(Error::UndefinedDrop(self_pct));
    }
    Ok(100.0 * (self_pct - mean_others_pct) / self_pct)
}

/// `1 / (1 + exp(-(self - mean_others) / 100))`.
pub fn cd_measure(self_pct: f64, mean_others_pct: f64) -> f64 {
    let x = (self_pct - mean_others_pct) / 100.0;
    let s = 1.0 / (1.0 + (-x.abs()).exp());
    // s >= 0.5, so 1 - s is exact and cd(a, b) + cd(b, a) == 1 holds bitwise.
    if x >= 0.0 {
        s
    } else {
        1.0 - s
    }
}

/// Mean precision at the rank of every positive, ranking by descending score
/// with ties kept in input order.
pub fn average_precision(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::DimensionMismatch {
            expected: scores.len(),
            found: positives.len(),
        });
    }
    let total = positives.iter().filter(|p| **p).count();
    if total == 0 {
        return Err(Error::NoPositives);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut acc = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if positives[i] {
            hits += 1;
            acc += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(acc / total as f64)
}

/// Percentage of matching entries.
pub fn recognition_rate(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::Empty("no predictions to score".into()));
    }
    let ok = predictions.iter().zip(labels).filter(|(a, b)| a == b).count();
    Ok(100.0 * ok as f64 / labels.len() as f64)
}

/// Adjusted Rand index between two labelings; 1 when both are a single
/// cluster (or otherwise identical trivial partitions).
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let mut table: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut ra: BTreeMap<usize, u64> = BTreeMap::new();
    let mut rb: BTreeMap<usize, u64> = BTreeMap::new();
    for (x, y) in a.iter().zip(b) {
        *table.entry((*x, *y)).or_default() += 1;
        *ra.entry(*x).or_default() += 1;
        *rb.entry(*y).or_default() += 1;
    }
    let c2 = |n: u64| (n * n.saturating_sub(1) / 2) as f64;
    let index: f64 = table.values().map(|&n| c2(n)).sum();
    let sa: f64 = ra.values().map(|&n| c2(n)).sum();
    let sb: f64 = rb.values().map(|&n| c2(n)).sum();
    let total = c2(a.len() as u64);
    if total == 0.0 {
        return Ok(1.0);
    }
    let expected = sa * sb / total;
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Per-class recognition with the full confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerClassTable {
    pub class_names: Vec<String>,
    /// Percent correct per class; `None` for classes absent from the labels.
    pub accuracy: Vec<Option<f64>>,
    /// `counts[true][predicted]`.
    pub counts: Vec<Vec<u64>>,
    /// Row-normalised counts; `None` rows for absent classes.
    pub normalized: Vec<Option<Vec<f64>>>,
}

impl PerClassTable {
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["class".to_string(), "accuracy".to_string()];
        header.extend(self.class_names.iter().map(|n| format!("pred:{n}")));
        w.write_record(&header).map_err(csv_err)?;
        for (i, name) in self.class_names.iter().enumerate() {
            let mut row = vec![name.clone(), fmt_opt(self.accuracy[i])];
            row.extend(self.counts[i].iter().map(u64::to_string));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::invalid(format!("CSV write failed: {e}"))
}

pub(crate) fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| format!("{x}"))
}

pub fn per_class_breakdown(predictions: &[usize], labels: &[usize], class_names: &[String]) -> Result<PerClassTable> {
    if predictions.len() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: labels.len(),
            found: predictions.len(),
        });
    }
    let k = class_names.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (&p, &l) in predictions.iter().zip(labels) {
        for v in [p, l] {
            if v >= k {
                return Err(Error::IndexOutOfRange { index: v, len: k });
            }
        }
        counts[l][p] += 1;
    }
    let mut accuracy = Vec::with_capacity(k);
    let mut normalized = Vec::with_capacity(k);
    for (i, row) in counts.iter().enumerate() {
        let n: u64 = row.iter().sum();
        if n == 0 {
            accuracy.push(None);
            normalized.push(None);
        } else {
            accuracy.push(Some(100.0 * row[i] as f64 / n as f64));
            normalized.push(Some(row.iter().map(|&c| c as f64 / n as f64).collect()));
        }
    }
    Ok(PerClassTable {
        class_names: class_names.to_vec(),
        accuracy,
        counts,
        normalized,
    })
}
