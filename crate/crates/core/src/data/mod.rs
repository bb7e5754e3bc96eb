//! Samples, datasets and everything that produces them.

mod io;
mod normalize;
mod split;
mod synth;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use io::{load_feature_table, read_feature_table, write_feature_table, LabelMap, LabelPolicy};
pub use normalize::{l2_normalize, l2_normalize_dataset, zscore_fit, ZScoreStats};
pub use split::{make_split, SplitCounts, SplitSpec};
pub use synth::{synth_generate, SynthSpec};

/// One feature vector with its class label and the collection it came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledSample {
    pub features: Vec<f64>,
    pub class_label: usize,
    pub collection_id: usize,
    pub sample_id: String,
}

/// A named, homogeneous collection of samples (one domain).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    name: String,
    collection_id: usize,
    dim: usize,
    samples: Vec<LabeledSample>,
    class_set: BTreeSet<usize>,
}

impl Dataset {
    /// Builds a dataset, checking that every sample has `dim` finite entries
    /// and carries `collection_id`.
    pub fn new(
        name: impl Into<String>,
        collection_id: usize,
        dim: usize,
        samples: Vec<LabeledSample>,
    ) -> Result<Self> {
        let name = name.into();
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: s.features.len(),
                });
            }
            if s.features.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "sample {i} (`{}`) of `{name}` has a non-finite feature",
                    s.sample_id
                )));
            }
            if s.collection_id != collection_id {
                return Err(Error::invalid(format!(
                    "sample {i} of `{name}` carries collection {} instead of {collection_id}",
                    s.collection_id
                )));
            }
        }
        let class_set = samples.iter().map(|s| s.class_label).collect();
        Ok(Dataset {
            name,
            collection_id,
            dim,
            samples,
            class_set,
        })
    }

    /// Convenience constructor from parallel feature/label lists.
    pub fn from_parts(
        name: impl Into<String>,
        collection_id: usize,
        features: Vec<Vec<f64>>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                found: labels.len(),
            });
        }
        let name = name.into();
        let dim = features.first().map_or(0, Vec::len);
        let samples = features
            .into_iter()
            .zip(labels)
            .enumerate()
            .map(|(i, (features, class_label))| LabeledSample {
                features,
                class_label,
                collection_id,
                sample_id: format!("{name}-{i}"),
            })
            .collect();
        Dataset::new(name, collection_id, dim, samples)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn collection_id(&self) -> usize {
        self.collection_id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn samples(&self) -> &[LabeledSample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_set(&self) -> &BTreeSet<usize> {
        &self.class_set
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.samples.iter().map(|s| s.features.clone()).collect()
    }

    pub fn labels(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class_label).collect()
    }

    /// Indices of the samples of each class, in sample order.
    pub fn indices_by_class(&self) -> Vec<(usize, Vec<usize>)> {
        self.class_set
            .iter()
            .map(|&c| {
                let idx = self
                    .samples
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| s.class_label == c)
                    .map(|(i, _)| i)
                    .collect();
                (c, idx)
            })
            .collect()
    }

    /// New dataset made of the samples at `indices` (in that order).
    pub fn subset(&self, name: impl Into<String>, indices: &[usize]) -> Dataset {
        let samples = indices.iter().map(|&i| self.samples[i].clone()).collect();
        Dataset::new(name, self.collection_id, self.dim, samples)
            .expect("subset of a valid dataset is valid")
    }

    /// Same samples re-tagged with another collection index.
    pub fn with_collection(&self, collection_id: usize) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample {
                collection_id,
                ..s.clone()
            })
            .collect();
        Dataset::new(self.name.clone(), collection_id, self.dim, samples)
            .expect("re-tagging keeps a dataset valid")
    }

    /// Same samples with every label passed through `f`.
    pub fn relabel(&self, f: impl Fn(usize) -> usize) -> Dataset {
        let samples = self
            .samples
            .iter()
            .map(|s| LabeledSample {
                class_label: f(s.class_label),
                ..s.clone()
            })
            .collect();
        Dataset::new(self.name.clone(), self.collection_id, self.dim, samples)
            .expect("relabeling keeps a dataset valid")
    }

    /// Same labels with every feature vector passed through `f`.
    pub fn map_features(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Result<Dataset> {
        let samples: Vec<_> = self
            .samples
            .iter()
            .map(|s| LabeledSample {
                features: f(&s.features),
                ..s.clone()
            })
            .collect();
        let dim = samples.first().map_or(self.dim, |s| s.features.len());
        Dataset::new(self.name.clone(), self.collection_id, dim, samples)
    }

    /// Concatenates datasets into one collection named `name`.
    pub fn concat(name: impl Into<String>, collection_id: usize, parts: &[&Dataset]) -> Result<Dataset> {
        let dim = parts.first().map_or(0, |d| d.dim);
        let samples = parts
            .iter()
            .flat_map(|d| d.samples.iter())
            .map(|s| LabeledSample {
                collection_id,
                ..s.clone()
            })
            .collect();
        Dataset::new(name, collection_id, dim, samples)
    }
}
