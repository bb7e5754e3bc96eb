//! Feature-table CSV ingestion and emission.
//!
//! Layout: a header `id,collection,class,f0,...,f{d-1}` followed by one sample
//! per line. `collection` is the collection name and must be constant within a
//! file; `class` is a class name resolved through a [`LabelMap`]. Label maps are
//! themselves stored as `class_name,class_index` CSV files.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Dataset, LabeledSample};
use crate::{Error, Result};

/// Dense mapping between class names and class indices.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LabelMap {
    names: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
    frozen: bool,
}

/// Whether unknown class names may be added while loading.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelPolicy {
    Extend,
    Frozen,
}

impl LabelMap {
    /// An empty map that grows in first-appearance order.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_names<I, S>(names: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut map = LabelMap::new();
        for n in names {
            let n = n.into();
            if map.index.contains_key(&n) {
                return Err(Error::invalid(format!("duplicate class name `{n}`")));
            }
            map.insert(n);
        }
        Ok(map)
    }

    /// Numeric class names `"0".."k-1"`.
    pub fn numeric(k: usize) -> Self {
        Self::from_names((0..k).map(|i| i.to_string())).expect("numeric names are unique")
    }

    pub fn policy(&self) -> LabelPolicy {
        if self.frozen {
            LabelPolicy::Frozen
        } else {
            LabelPolicy::Extend
        }
    }

    pub fn freeze(mut self) -> Self {
        self.frozen = true;
        self
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.names.get(index).map(String::as_str)
    }

    pub fn get(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    fn insert(&mut self, name: String) -> usize {
        let idx = self.names.len();
        self.index.insert(name.clone(), idx);
        self.names.push(name);
        idx
    }

    fn resolve(&mut self, name: &str, row: usize) -> Result<usize> {
        if let Some(i) = self.get(name) {
            return Ok(i);
        }
        if self.frozen {
            return Err(Error::Parse {
                row,
                message: format!("unknown class label `{name}` and the label map is fixed"),
            });
        }
        Ok(self.insert(name.to_string()))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["class_name", "class_index"]).map_err(csv_io)?;
        for (i, n) in self.names.iter().enumerate() {
            w.write_record([n.as_str(), &i.to_string()]).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a `class_name,class_index` table. The result is frozen.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let mut pairs = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let row = i + 2;
            let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
            if rec.len() != 2 {
                return Err(Error::Parse { row, message: "expected 2 fields".into() });
            }
            let idx: usize = rec[1].trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("bad class index `{}`", &rec[1]),
            })?;
            pairs.push((idx, rec[0].to_string()));
        }
        pairs.sort();
        if pairs.iter().enumerate().any(|(i, (idx, _))| *idx != i) {
            return Err(Error::invalid("label map indices must be dense 0..k-1"));
        }
        Ok(Self::from_names(pairs.into_iter().map(|(_, n)| n))?.freeze())
    }

    pub(crate) fn rebuild_index(&mut self) {
        self.index = self.names.iter().enumerate().map(|(i, n)| (n.clone(), i)).collect();
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

/// Loads one collection from a feature CSV file.
///
/// `labels` resolves class names; with [`LabelPolicy::Frozen`] an unknown
/// name is a parse error naming the row (rows are counted from 1, the header
/// being row 1).
pub fn load_feature_table(
    path: impl AsRef<Path>,
    expected_dim: Option<usize>,
    labels: &mut LabelMap,
    collection_id: usize,
) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_feature_table(file, expected_dim, labels, collection_id)
}

pub fn read_feature_table<R: Read>(
    input: R,
    expected_dim: Option<usize>,
    labels: &mut LabelMap,
    collection_id: usize,
) -> Result<Dataset> {
    if labels.index.len() != labels.names.len() {
        labels.rebuild_index();
    }
    let mut r = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let header = r.headers().map_err(|e| Error::Parse { row: 1, message: e.to_string() })?.clone();
    if header.len() < 3 || &header[0] != "id" || &header[1] != "collection" || &header[2] != "class" {
        return Err(Error::Parse {
            row: 1,
            message: "header must start with `id,collection,class`".into(),
        });
    }
    let dim = header.len() - 3;
    for (k, h) in header.iter().skip(3).enumerate() {
        if h != format!("f{k}") {
            return Err(Error::Parse { row: 1, message: format!("feature column {k} must be named `f{k}`, found `{h}`") });
        }
    }
    if let Some(e) = expected_dim {
        if e != dim {
            return Err(Error::Parse {
                row: 1,
                message: format!("header declares {dim} features, expected {e}"),
            });
        }
    }
    let mut name: Option<String> = None;
    let mut samples = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let row = i + 2;
        let rec = rec.map_err(|e| Error::Parse { row, message: e.to_string() })?;
        if rec.len() != dim + 3 {
            return Err(Error::Parse {
                row,
                message: format!("expected {} fields, found {}", dim + 3, rec.len()),
            });
        }
        match &name {
            None => name = Some(rec[1].to_string()),
            Some(n) if n != &rec[1] => {
                return Err(Error::Parse {
                    row,
                    message: format!("collection `{}` differs from `{n}` of earlier rows", &rec[1]),
                })
            }
            _ => {}
        }
        let class_label = labels.resolve(&rec[2], row)?;
        let mut features = Vec::with_capacity(dim);
        for (k, field) in rec.iter().skip(3).enumerate() {
            let v: f64 = field.trim().parse().map_err(|_| Error::Parse {
                row,
                message: format!("feature f{k} `{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse { row, message: format!("feature f{k} is not finite") });
            }
            features.push(v);
        }
        samples.push(LabeledSample {
            features,
            class_label,
            collection_id,
            sample_id: rec[0].to_string(),
        });
    }
    let name = name.ok_or_else(|| Error::Empty("feature table has no data rows".into()))?;
    Dataset::new(name, collection_id, dim, samples)
}

/// Writes `ds` in the feature CSV layout. Every class label must have a name
/// in `labels`.
pub fn write_feature_table<W: Write>(ds: &Dataset, labels: &LabelMap, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["id".to_string(), "collection".to_string(), "class".to_string()];
    header.extend((0..ds.dim()).map(|k| format!("f{k}")));
    w.write_record(&header).map_err(csv_io)?;
    for s in ds.samples() {
        let class = labels.name(s.class_label).ok_or_else(|| {
            Error::invalid(format!("class {} has no name in the label map", s.class_label))
        })?;
        let mut rec = vec![s.sample_id.clone(), ds.name().to_string(), class.to_string()];
        rec.extend(s.features.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec).map_err(csv_io)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "id,collection,class,f0,f1\na,caltech,car,1.0,2e-1\nb,caltech,cow,-3,4.5\nc,caltech,car,0,1E2\n";

    #[test]
    fn parses_three_rows() {
        let mut labels = LabelMap::new();
        let ds = read_feature_table(SMALL.as_bytes(), Some(2), &mut labels, 0).unwrap();
        assert_eq!(ds.len(), 3);
        assert_eq!(ds.dim(), 2);
        assert_eq!(ds.name(), "caltech");
        assert_eq!(ds.labels(), vec![0, 1, 0]);
        assert_eq!(ds.samples()[2].features, vec![0.0, 100.0]);
        assert_eq!(labels.names(), &["car".to_string(), "cow".to_string()]);
    }

    #[test]
    fn short_row_names_the_row() {
        let text = "id,collection,class,f0,f1\na,x,car,1,2\nb,x,car,1\n";
        let err = read_feature_table(text.as_bytes(), None, &mut LabelMap::new(), 0).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn unknown_label_with_frozen_map() {
        let mut labels = LabelMap::from_names(["car"]).unwrap().freeze();
        let err = read_feature_table(SMALL.as_bytes(), None, &mut labels, 0).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 3, .. }), "{err}");
    }

    #[test]
    fn expected_dim_checked() {
        let err = read_feature_table(SMALL.as_bytes(), Some(3), &mut LabelMap::new(), 0).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, .. }));
    }

    #[test]
    fn label_map_csv_round_trip() {
        let map = LabelMap::from_names(["car", "cow", "dog"]).unwrap();
        let mut buf = Vec::new();
        map.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8(buf.clone()).unwrap().starts_with("class_name,class_index\n"));
        let back = LabelMap::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.names(), map.names());
        assert_eq!(back.policy(), LabelPolicy::Frozen);
    }
}
