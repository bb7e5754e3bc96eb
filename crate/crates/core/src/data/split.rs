use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::{rng, Error, Result};

/// How many samples of each class to draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitCounts {
    /// The same count for every class present in the dataset.
    PerClass(usize),
    /// Explicit counts; classes not listed get none.
    Explicit(BTreeMap<usize, usize>),
}

impl SplitCounts {
    fn for_class(&self, class: usize) -> usize {
        match self {
            SplitCounts::PerClass(n) => *n,
            SplitCounts::Explicit(m) => m.get(&class).copied().unwrap_or(0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: SplitCounts,
    pub test: SplitCounts,
    pub seed: u64,
    pub repetition_index: u64,
}

impl SplitSpec {
    pub fn per_class(train: usize, test: usize, seed: u64, repetition_index: u64) -> Self {
        SplitSpec {
            train: SplitCounts::PerClass(train),
            test: SplitCounts::PerClass(test),
            seed,
            repetition_index,
        }
    }
}

/// Stratified sampling without replacement into disjoint train and test sets.
///
/// Each class's indices are shuffled with the stream
/// `(seed, repetition_index, "split:<collection_id>")`; the first draws go to
/// train and the next ones to test. Both outputs list samples in their
/// original order.
pub fn make_split(ds: &Dataset, spec: &SplitSpec) -> Result<(Dataset, Dataset)> {
    if let SplitCounts::Explicit(m) = &spec.train {
        check_listed(ds, m)?;
    }
    if let SplitCounts::Explicit(m) = &spec.test {
        check_listed(ds, m)?;
    }
    let mut rng = rng::stream(
        spec.seed,
        spec.repetition_index,
        &format!("split:{}", ds.collection_id()),
    );
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (class, mut idx) in ds.indices_by_class() {
        let n_train = spec.train.for_class(class);
        let n_test = spec.test.for_class(class);
        if n_train + n_test > idx.len() {
            return Err(Error::Shortage {
                dataset: ds.name().to_string(),
                class,
                requested: n_train + n_test,
                available: idx.len(),
            });
        }
        idx.shuffle(&mut rng);
        train.extend_from_slice(&idx[..n_train]);
        test.extend_from_slice(&idx[n_train..n_train + n_test]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((ds.subset(ds.name(), &train), ds.subset(ds.name(), &test)))
}

fn check_listed(ds: &Dataset, counts: &BTreeMap<usize, usize>) -> Result<()> {
    for (&class, &n) in counts {
        if n > 0 && !ds.class_set().contains(&class) {
            return Err(Error::Shortage {
                dataset: ds.name().to_string(),
                class,
                requested: n,
                available: 0,
            });
        }
    }
    Ok(())
}
