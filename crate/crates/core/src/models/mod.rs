//! The forecasters: persistence, linear SVR and three neural families, all
//! producing a scaled price for a windowed sample.

mod naive;
mod neural;
mod svr;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use naive::{naive_forecast, NaiveModel};
pub use neural::{FcnnConfig, LrcnConfig, LstmConfig, NetFamily, NeuralNet};
pub use svr::{primal_objective, svr_fit, SvrConfig, SvrFitInfo, SvrModel};

use crate::data::{Horizon, WindowedSample, PRICE_FEATURE};
use crate::error::{Error, Result};

/// Anything that maps a window to a scaled price forecast.
pub trait Forecaster {
    fn forecast(&self, sample: &WindowedSample) -> Result<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Naive,
    Svr,
    Fcnn,
    Lstm,
    Lrcn,
    Ilrcn,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::Naive,
        ModelKind::Svr,
        ModelKind::Fcnn,
        ModelKind::Lstm,
        ModelKind::Lrcn,
        ModelKind::Ilrcn,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Naive => "naive",
            ModelKind::Svr => "svr",
            ModelKind::Fcnn => "fcnn",
            ModelKind::Lstm => "lstm",
            ModelKind::Lrcn => "lrcn",
            ModelKind::Ilrcn => "ilrcn",
        }
    }

    /// Display label used in report tables.
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Naive => "Naive",
            ModelKind::Svr => "SVR",
            ModelKind::Fcnn => "FCNN",
            ModelKind::Lstm => "LSTM",
            ModelKind::Lrcn => "LRCN",
            ModelKind::Ilrcn => "ILRCN",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| {
                Error::config(format!(
                    "unknown model kind {s:?}; expected one of naive, svr, fcnn, lstm, lrcn, ilrcn"
                ))
            })
    }
}

/// Model kind plus its architecture or solver settings.
///
/// `ilrcn` builds the same network as `lrcn`; the correction is applied
/// only at prediction time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelSpec {
    Naive,
    Svr(SvrConfig),
    Fcnn(FcnnConfig),
    Lstm(LstmConfig),
    Lrcn(LrcnConfig),
    Ilrcn(LrcnConfig),
}

impl Default for ModelSpec {
    fn default() -> Self {
        ModelSpec::Lrcn(LrcnConfig::default())
    }
}

impl ModelSpec {
    pub fn for_kind(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Naive => ModelSpec::Naive,
            ModelKind::Svr => ModelSpec::Svr(SvrConfig::default()),
            ModelKind::Fcnn => ModelSpec::Fcnn(FcnnConfig::default()),
            ModelKind::Lstm => ModelSpec::Lstm(LstmConfig::default()),
            ModelKind::Lrcn => ModelSpec::Lrcn(LrcnConfig::default()),
            ModelKind::Ilrcn => ModelSpec::Ilrcn(LrcnConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Naive => ModelKind::Naive,
            ModelSpec::Svr(_) => ModelKind::Svr,
            ModelSpec::Fcnn(_) => ModelKind::Fcnn,
            ModelSpec::Lstm(_) => ModelKind::Lstm,
            ModelSpec::Lrcn(_) => ModelKind::Lrcn,
            ModelSpec::Ilrcn(_) => ModelKind::Ilrcn,
        }
    }
}

/// A fitted forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    Naive(NaiveModel),
    Svr(SvrModel),
    Neural(NeuralNet),
}

impl Model {
    pub fn naive(horizon: Horizon) -> Self {
        Model::Naive(NaiveModel { horizon })
    }

    pub fn param_count(&self) -> usize {
        match self {
            Model::Naive(_) => 0,
            Model::Svr(m) => m.w.len() + 1,
            Model::Neural(n) => n.param_count(),
        }
    }
}

impl Forecaster for Model {
    fn forecast(&self, sample: &WindowedSample) -> Result<f64> {
        match self {
            // The last input row is the record `offset` hours before the target.
            Model::Naive(_) => Ok(sample.last_row()[PRICE_FEATURE]),
            Model::Svr(m) => m.predict(&sample.inputs),
            Model::Neural(n) => n.predict(&sample.inputs),
        }
    }
}

impl Forecaster for NeuralNet {
    fn forecast(&self, sample: &WindowedSample) -> Result<f64> {
        self.predict(&sample.inputs)
    }
}
