//! JSON model documents.
//!
//! Floats are written in shortest round-trip form, so loading a document
//! reproduces every weight bit for bit.

use serde::{Deserialize, Serialize};

use super::{LinearModel, OvaModel};
use crate::{Error, Result};

pub const MODEL_FORMAT: &str = "biasbench-linear-model/1";
/// `sign(0) = +1`, argmax ties to the lowest class index.
pub const TIE_RULE_VERSION: &str = "sign0-positive+argmax-lowest-index/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DeltaBlock {
    pub dataset: String,
    pub weights: Vec<f64>,
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub format: String,
    pub tie_rule: String,
    pub dim: usize,
    pub c: f64,
    /// Class of each weight row; empty for a binary machine.
    #[serde(default)]
    pub classes: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub offsets: Vec<f64>,
    /// Per-dataset offsets of a shared-plus-specific model.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub deltas: Vec<DeltaBlock>,
}

impl ModelDocument {
    pub fn from_linear(m: &LinearModel) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            tie_rule: TIE_RULE_VERSION.into(),
            dim: m.dim(),
            c: m.trained_c,
            classes: Vec::new(),
            weights: vec![m.weights.clone()],
            offsets: vec![m.offset],
            deltas: Vec::new(),
        }
    }

    pub fn from_ova(m: &OvaModel) -> Self {
        ModelDocument {
            format: MODEL_FORMAT.into(),
            tie_rule: TIE_RULE_VERSION.into(),
            dim: m.dim(),
            c: m.models.first().map_or(0.0, |l| l.trained_c),
            classes: m.classes.clone(),
            weights: m.models.iter().map(|l| l.weights.clone()).collect(),
            offsets: m.models.iter().map(|l| l.offset).collect(),
            deltas: Vec::new(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.format != MODEL_FORMAT {
            return Err(Error::invalid(format!("unsupported model format `{}`", self.format)));
        }
        if self.tie_rule != TIE_RULE_VERSION {
            return Err(Error::invalid(format!("unsupported tie rule `{}`", self.tie_rule)));
        }
        if self.weights.len() != self.offsets.len() || self.weights.iter().any(|w| w.len() != self.dim) {
            return Err(Error::invalid("weight rows do not match dim/offsets"));
        }
        Ok(())
    }

    fn model(&self, i: usize) -> LinearModel {
        LinearModel {
            weights: self.weights[i].clone(),
            offset: self.offsets[i],
            trained_c: self.c,
        }
    }

    pub fn to_linear(&self) -> Result<LinearModel> {
        self.check()?;
        if self.weights.len() != 1 || !self.classes.is_empty() {
            return Err(Error::invalid("document does not hold a single binary machine"));
        }
        Ok(self.model(0))
    }

    pub fn to_ova(&self) -> Result<OvaModel> {
        self.check()?;
        if self.classes.len() != self.weights.len() || self.classes.len() < 2 {
            return Err(Error::invalid("document does not hold a one-vs-all model"));
        }
        Ok(OvaModel {
            classes: self.classes.clone(),
            models: (0..self.weights.len()).map(|i| self.model(i)).collect(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text)?;
        doc.check()?;
        Ok(doc)
    }
}
