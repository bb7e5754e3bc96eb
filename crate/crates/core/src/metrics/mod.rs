//! Bias measures, ranking and recognition metrics, and the experiment runners.

mod matrix;
mod measures;
mod protocol;

use serde::{Deserialize, Serialize};

pub use matrix::{Cell, CrossDatasetMatrix, RowStats};
pub use measures::{
    adjusted_rand_index, average_precision, cd_measure, per_class_breakdown, percent_drop, recognition_rate,
    PerClassTable,
};
pub use protocol::{
    run_cross_matrix, run_name_the_dataset, run_noisy_source_curve, CrossMatrixConfig, CrossMatrixResult, CrossTask,
    Method, MethodCurve, NameTheDatasetConfig, NameTheDatasetResult, NoisySourceConfig, NoisySourceResult,
    PerClassEntry, SelfLabelTrace,
};

/// Everything one experiment produced, with the configuration that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub experiment_id: String,
    pub config: serde_json::Value,
    pub repetitions: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name_the_dataset: Option<NameTheDatasetResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cross_matrix: Option<CrossMatrixResult>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noisy_source: Option<NoisySourceResult>,
}

impl BiasReport {
    pub fn to_json(&self) -> crate::Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
