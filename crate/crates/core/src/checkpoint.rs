//! Versioned JSON checkpoints.
//!
//! ```json
//! { "format": "kgcm-checkpoint", "version": 1, "kind": "kgcm", "seed": 0,
//!   "config": { ... }, "model": { ... } }
//! ```
//!
//! `model` holds the architecture spec and every parameter array by name
//! (mask logits under `mask_logits`). Floats are written in shortest
//! round-trip form, so load(save(m)) == m bit for bit.

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::autodiff::Tape;
use crate::baselines::BaselineModel;
use crate::error::{KgcmError, Result};
use crate::model::{KgcmModel, Mode};
use crate::nn::{Bound, ParamStore};
use crate::objectives::LossWeights;
use crate::train::{CausalModel, StepOutputs};
use crate::windowing::WindowedSample;

pub const FORMAT: &str = "kgcm-checkpoint";
pub const VERSION: u32 = 1;

/// Any trainable model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum AnyModel {
    Kgcm(KgcmModel),
    Baseline(BaselineModel),
}

impl AnyModel {
    pub fn kind(&self) -> &'static str {
        match self {
            AnyModel::Kgcm(_) => "kgcm",
            AnyModel::Baseline(b) => b.spec.variant.name(),
        }
    }

    fn inner(&self) -> &dyn CausalModel {
        match self {
            AnyModel::Kgcm(m) => m,
            AnyModel::Baseline(m) => m,
        }
    }

    pub fn n_covariates(&self) -> usize {
        match self {
            AnyModel::Kgcm(m) => m.spec.n_covariates,
            AnyModel::Baseline(m) => m.spec.n_covariates,
        }
    }
}

impl CausalModel for AnyModel {
    fn params(&self) -> &ParamStore {
        self.inner().params()
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        match self {
            AnyModel::Kgcm(m) => &mut m.params,
            AnyModel::Baseline(m) => &mut m.params,
        }
    }

    fn step(&self, tape: &mut Tape, bound: &Bound, batch: &[&WindowedSample], mode: Mode) -> Result<StepOutputs> {
        self.inner().step(tape, bound, batch, mode)
    }

    fn predict(&self, samples: &[&WindowedSample]) -> Result<(Vec<f64>, Vec<f64>, Array2<f64>)> {
        self.inner().predict(samples)
    }

    fn mask_summary(&self) -> Option<(f64, usize)> {
        self.inner().mask_summary()
    }

    fn loss_weights(&self, configured: &LossWeights) -> LossWeights {
        self.inner().loss_weights(configured)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub kind: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub model: AnyModel,
}

impl Checkpoint {
    pub fn new(model: AnyModel, seed: u64, config: serde_json::Value) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            kind: model.kind().into(),
            seed,
            config,
            model,
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format != FORMAT {
            return Err(KgcmError::Data(format!("not a checkpoint (format '{}')", ck.format)));
        }
        if ck.version != VERSION {
            return Err(KgcmError::Data(format!("unsupported checkpoint version {}", ck.version)));
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| KgcmError::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| KgcmError::io(path, e))?;
        Self::from_json(&text)
    }
}
