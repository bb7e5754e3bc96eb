use std::io::Write;

use serde::{Deserialize, Serialize};

use super::measures::{cd_measure, csv_err, fmt_opt, percent_drop};
use crate::linalg::{mean, population_std};
use crate::{Error, Result};

/// A matrix entry: a value in percentage points, or the reason it is missing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cell {
    Value(f64),
    Missing(String),
}

impl Cell {
    pub fn value(&self) -> Option<f64> {
        match self {
            Cell::Value(v) => Some(*v),
            Cell::Missing(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowStats {
    pub self_pct: Option<f64>,
    pub mean_others: Option<f64>,
    pub percent_drop: Option<f64>,
    pub cd: Option<f64>,
    /// Why some statistic is absent.
    pub note: Option<String>,
}

/// Train (rows) by test (columns) performance in percentage points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossDatasetMatrix {
    pub train_labels: Vec<String>,
    pub test_labels: Vec<String>,
    /// Column holding each row's in-dataset (Self) score.
    pub self_column: Vec<usize>,
    pub cells: Vec<Vec<Cell>>,
}

impl CrossDatasetMatrix {
    /// The Self column of a row is the test column with the same label, or
    /// the column with the row's index when no label matches.
    pub fn new(train_labels: Vec<String>, test_labels: Vec<String>, cells: Vec<Vec<Cell>>) -> Result<Self> {
        if cells.len() != train_labels.len() || cells.iter().any(|r| r.len() != test_labels.len()) {
            return Err(Error::invalid("matrix shape does not match its labels"));
        }
        if test_labels.len() < 2 {
            return Err(Error::invalid("a cross-dataset matrix needs at least two test columns"));
        }
        for r in &cells {
            for c in r {
                if let Cell::Value(v) = c {
                    if !(0.0..=100.0).contains(v) {
                        return Err(Error::invalid(format!("matrix value {v} outside [0, 100]")));
                    }
                }
            }
        }
        let self_column = train_labels
            .iter()
            .enumerate()
            .map(|(i, name)| {
                test_labels
                    .iter()
                    .position(|t| t == name)
                    .or(if i < test_labels.len() { Some(i) } else { None })
                    .ok_or_else(|| Error::invalid(format!("row `{name}` has no Self column")))
            })
            .collect::<Result<_>>()?;
        Ok(CrossDatasetMatrix {
            train_labels,
            test_labels,
            self_column,
            cells,
        })
    }

    /// Square matrix of plain values with the same labels on both axes.
    pub fn from_values(labels: &[&str], values: &[Vec<f64>]) -> Result<Self> {
        let names: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        let cells = values.iter().map(|r| r.iter().map(|v| Cell::Value(*v)).collect()).collect();
        Self::new(names.clone(), names, cells)
    }

    pub fn row_stats(&self, row: usize) -> RowStats {
        let cells = &self.cells[row];
        let sc = self.self_column[row];
        let missing: Vec<String> = cells
            .iter()
            .enumerate()
            .filter_map(|(j, c)| match c {
                Cell::Missing(r) => Some(format!("{}: {r}", self.test_labels[j])),
                Cell::Value(_) => None,
            })
            .collect();
        let self_pct = cells[sc].value();
        if !missing.is_empty() {
            return RowStats {
                self_pct,
                mean_others: None,
                percent_drop: None,
                cd: None,
                note: Some(format!("missing cells: {}", missing.join("; "))),
            };
        }
        let others: Vec<f64> = cells
            .iter()
            .enumerate()
            .filter(|(j, _)| *j != sc)
            .filter_map(|(_, c)| c.value())
            .collect();
        let s = self_pct.unwrap_or(0.0);
        let mo = mean(&others);
        let (drop, note) = match percent_drop(s, mo) {
            Ok(d) => (Some(d), None),
            Err(e) => (None, Some(e.to_string())),
        };
        RowStats {
            self_pct,
            mean_others: Some(mo),
            percent_drop: drop,
            cd: Some(cd_measure(s, mo)),
            note,
        }
    }

    pub fn all_row_stats(&self) -> Vec<RowStats> {
        (0..self.cells.len()).map(|i| self.row_stats(i)).collect()
    }

    /// Cell-wise mean and population standard deviation over repetitions. A
    /// cell missing in any repetition is missing in both layers.
    pub fn aggregate(reps: &[CrossDatasetMatrix]) -> Result<(CrossDatasetMatrix, CrossDatasetMatrix)> {
        let first = reps.first().ok_or_else(|| Error::Empty("no repetitions to aggregate".into()))?;
        if reps
            .iter()
            .any(|r| r.train_labels != first.train_labels || r.test_labels != first.test_labels)
        {
            return Err(Error::invalid("repetitions disagree on matrix labels"));
        }
        let rows = first.cells.len();
        let cols = first.test_labels.len();
        let mut mean_cells = Vec::with_capacity(rows);
        let mut std_cells = Vec::with_capacity(rows);
        for i in 0..rows {
            let mut mr = Vec::with_capacity(cols);
            let mut sr = Vec::with_capacity(cols);
            for j in 0..cols {
                let mut vals = Vec::with_capacity(reps.len());
                let mut reason = None;
                for (k, r) in reps.iter().enumerate() {
                    match &r.cells[i][j] {
                        Cell::Value(v) => vals.push(*v),
                        Cell::Missing(m) => {
                            reason.get_or_insert_with(|| format!("repetition {k}: {m}"));
                        }
                    }
                }
                match reason {
                    Some(m) => {
                        mr.push(Cell::Missing(m.clone()));
                        sr.push(Cell::Missing(m));
                    }
                    None => {
                        mr.push(Cell::Value(mean(&vals).clamp(0.0, 100.0)));
                        sr.push(Cell::Value(population_std(&vals)));
                    }
                }
            }
            mean_cells.push(mr);
            std_cells.push(sr);
        }
        let mean_m = CrossDatasetMatrix {
            cells: mean_cells,
            ..first.clone()
        };
        let std_m = CrossDatasetMatrix {
            cells: std_cells,
            ..first.clone()
        };
        Ok((mean_m, std_m))
    }

    /// One row per training set: the cells followed by the row statistics.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["train".to_string()];
        header.extend(self.test_labels.iter().cloned());
        header.extend(["self", "mean_others", "percent_drop", "cd"].map(String::from));
        w.write_record(&header).map_err(csv_err)?;
        for (i, name) in self.train_labels.iter().enumerate() {
            let st = self.row_stats(i);
            let mut row = vec![name.clone()];
            row.extend(self.cells[i].iter().map(|c| fmt_opt(c.value())));
            row.extend([st.self_pct, st.mean_others, st.percent_drop, st.cd].map(fmt_opt));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Plain numeric grid (missing cells as NaN) for plotting.
    pub fn values(&self) -> Vec<Vec<f64>> {
        self.cells
            .iter()
            .map(|r| r.iter().map(|c| c.value().unwrap_or(f64::NAN)).collect())
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_row() {
        let m = CrossDatasetMatrix::new(
            vec!["b".into()],
            vec!["a".into(), "b".into(), "c".into()],
            vec![vec![Cell::Value(10.0), Cell::Value(40.0), Cell::Value(20.0)]],
        )
        .unwrap();
        let s = m.row_stats(0);
        assert_eq!(s.self_pct, Some(40.0));
        assert_eq!(s.mean_others, Some(15.0));
    }

    #[test]
    fn missing_poisons_row() {
        let m = CrossDatasetMatrix::new(
            vec!["a".into(), "b".into()],
            vec!["a".into(), "b".into()],
            vec![
                vec![Cell::Value(50.0), Cell::Missing("no positives".into())],
                vec![Cell::Value(20.0), Cell::Value(60.0)],
            ],
        )
        .unwrap();
        assert!(m.row_stats(0).cd.is_none());
        assert!(m.row_stats(0).note.unwrap().contains("no positives"));
        assert!(m.row_stats(1).cd.is_some());
    }

    #[test]
    fn aggregate_layers() {
        let a = CrossDatasetMatrix::from_values(&["x", "y"], &[vec![10.0, 20.0], vec![30.0, 40.0]]).unwrap();
        let b = CrossDatasetMatrix::from_values(&["x", "y"], &[vec![20.0, 20.0], vec![30.0, 60.0]]).unwrap();
        let (m, s) = CrossDatasetMatrix::aggregate(&[a, b]).unwrap();
        assert_eq!(m.cells[0][0], Cell::Value(15.0));
        assert_eq!(s.cells[0][0], Cell::Value(5.0));
        assert_eq!(s.cells[0][1], Cell::Value(0.0));
    }

    #[test]
    fn out_of_range_rejected() {
        assert!(CrossDatasetMatrix::from_values(&["x", "y"], &[vec![10.0, 120.0], vec![0.0, 1.0]]).is_err());
    }
}
