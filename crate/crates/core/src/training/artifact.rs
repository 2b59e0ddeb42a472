use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::trainer::{StopReason, TrainOutcome, TrainingConfig};
use crate::correction::PriceQuantiles;
use crate::data::{FeatureScalers, WindowSpec, WindowedSample};
use crate::error::{Error, Result};
use crate::models::{Forecaster, Model, ModelKind, ModelSpec};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistorySummary {
    pub epochs: usize,
    pub best_epoch: usize,
    pub best_val_mse: Option<f64>,
    pub final_train_mse: Option<f64>,
    pub final_lr: Option<f64>,
    pub stop: StopReason,
    pub train_seconds: f64,
}

impl HistorySummary {
    pub fn from_outcome(outcome: &TrainOutcome, train_seconds: f64) -> Self {
        let last = outcome.history.epochs.last();
        HistorySummary {
            epochs: outcome.history.len(),
            best_epoch: outcome.best_epoch,
            best_val_mse: outcome.best_val_mse,
            final_train_mse: last.map(|e| e.train_mse),
            final_lr: last.map(|e| e.lr),
            stop: outcome.stop,
            train_seconds,
        }
    }
}

/// Everything needed to forecast from raw records: the fitted model, its
/// scalers and window, plus training provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: ModelKind,
    pub spec: ModelSpec,
    pub window: WindowSpec,
    pub scalers: FeatureScalers,
    pub price_quantiles: PriceQuantiles,
    pub training: TrainingConfig,
    pub summary: HistorySummary,
    pub model: Model,
}

impl ModelArtifact {
    pub fn predict_scaled(&self, sample: &WindowedSample) -> Result<f64> {
        self.model.forecast(sample)
    }

    pub fn predict_raw(&self, sample: &WindowedSample) -> Result<f64> {
        self.scalers.inverse_price(self.model.forecast(sample)?)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Parse {
            what: "artifact".into(),
            message: e.to_string(),
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let parse_err = |e: serde_json::Error| Error::Parse {
            what: "artifact".into(),
            message: e.to_string(),
        };
        let value: serde_json::Value = serde_json::from_str(text).map_err(parse_err)?;
        let found = value
            .get("format_version")
            .and_then(serde_json::Value::as_u64)
            .ok_or_else(|| Error::Parse {
                what: "artifact".into(),
                message: "missing format_version".into(),
            })?;
        if found != u64::from(FORMAT_VERSION) {
            return Err(Error::Version {
                found: u32::try_from(found).unwrap_or(u32::MAX),
                supported: FORMAT_VERSION,
            });
        }
        serde_json::from_str(text).map_err(parse_err)
    }
}

impl Forecaster for ModelArtifact {
    fn forecast(&self, sample: &WindowedSample) -> Result<f64> {
        self.predict_scaled(sample)
    }
}

pub fn save_artifact(artifact: &ModelArtifact, path: &Path) -> Result<()> {
    let text = artifact.to_json()?;
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn load_artifact(path: &Path) -> Result<ModelArtifact> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelArtifact::from_json(&text)
}
