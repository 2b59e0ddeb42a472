use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{
    CellKind, Conv1d, Dense, LastStep, Layer, MaxPool1d, RecurrentCell, RecurrentLayer, Relu,
    Sequential, Stage, Tensor,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetFamily {
    Fcnn,
    Lstm,
    Lrcn,
}

impl fmt::Display for NetFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NetFamily::Fcnn => "fcnn",
            NetFamily::Lstm => "lstm",
            NetFamily::Lrcn => "lrcn",
        })
    }
}

/// Dense layers with ReLU between them over the flattened window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcnnConfig {
    pub hidden: Vec<usize>,
}

impl Default for FcnnConfig {
    fn default() -> Self {
        FcnnConfig {
            hidden: vec![128, 64],
        }
    }
}

/// Stacked recurrent layers over the window rows, dense head on the last
/// output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LstmConfig {
    pub hidden: Vec<usize>,
    pub cell: CellKind,
}

impl Default for LstmConfig {
    fn default() -> Self {
        LstmConfig {
            hidden: vec![64, 64],
            cell: CellKind::StandardLstm,
        }
    }
}

/// conv -> ReLU -> conv -> ReLU -> (optional max pool) -> recurrent x2 -> dense.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LrcnConfig {
    pub conv1_filters: usize,
    pub conv1_kernel: usize,
    pub conv2_filters: usize,
    pub conv2_kernel: usize,
    pub stride: usize,
    pub padding: usize,
    pub pool: Option<usize>,
    pub hidden: Vec<usize>,
    pub cell: CellKind,
}

impl Default for LrcnConfig {
    fn default() -> Self {
        LrcnConfig {
            conv1_filters: 32,
            conv1_kernel: 3,
            conv2_filters: 16,
            conv2_kernel: 3,
            stride: 1,
            padding: 1,
            pool: None,
            hidden: vec![64, 64],
            cell: CellKind::StandardLstm,
        }
    }
}

impl LrcnConfig {
    /// A narrow variant that trains in seconds on desk-scale data.
    pub fn small() -> Self {
        LrcnConfig {
            conv1_filters: 8,
            conv2_filters: 8,
            hidden: vec![16, 16],
            ..LrcnConfig::default()
        }
    }

    /// The recurrent-only baseline with the same recurrent stack and head.
    pub fn recurrent_part(&self) -> LstmConfig {
        LstmConfig {
            hidden: self.hidden.clone(),
            cell: self.cell,
        }
    }
}

/// A trained or trainable network mapping a `[window_n x features]` window
/// to one scaled price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralNet {
    pub family: NetFamily,
    pub window_n: usize,
    pub features: usize,
    pub body: Sequential,
}

fn positive(name: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(format!("{name} must be positive")));
    }
    Ok(())
}

fn recurrent_stack<R: Rng>(
    stages: &mut Vec<Stage>,
    input_dim: usize,
    hidden: &[usize],
    cell: CellKind,
    rng: &mut R,
) -> Result<usize> {
    if hidden.is_empty() {
        return Err(Error::config("at least one recurrent layer is required"));
    }
    let mut dim = input_dim;
    for &h in hidden {
        positive("recurrent hidden size", h)?;
        stages.push(Stage::Recurrent(RecurrentLayer::new(RecurrentCell::init(
            cell, dim, h, rng,
        )?)));
        dim = h;
    }
    stages.push(Stage::LastStep(LastStep::new(dim)));
    Ok(dim)
}

impl NeuralNet {
    fn finish(
        family: NetFamily,
        window_n: usize,
        features: usize,
        stages: Vec<Stage>,
    ) -> Result<Self> {
        positive("window length", window_n)?;
        positive("feature count", features)?;
        let body = Sequential::new(stages);
        let out = body.output_len(window_n * features)?;
        if out != 1 {
            return Err(Error::config(format!(
                "network output must be scalar, got {out}"
            )));
        }
        Ok(NeuralNet {
            family,
            window_n,
            features,
            body,
        })
    }

    pub fn fcnn<R: Rng>(
        window_n: usize,
        features: usize,
        cfg: &FcnnConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut stages = Vec::new();
        let mut dim = window_n * features;
        for &h in &cfg.hidden {
            positive("fcnn hidden size", h)?;
            stages.push(Stage::Dense(Dense::init(dim, h, rng)?));
            stages.push(Stage::Relu(Relu::new()));
            dim = h;
        }
        stages.push(Stage::Dense(Dense::init(dim, 1, rng)?));
        Self::finish(NetFamily::Fcnn, window_n, features, stages)
    }

    pub fn lstm<R: Rng>(
        window_n: usize,
        features: usize,
        cfg: &LstmConfig,
        rng: &mut R,
    ) -> Result<Self> {
        let mut stages = Vec::new();
        let dim = recurrent_stack(&mut stages, features, &cfg.hidden, cfg.cell, rng)?;
        stages.push(Stage::Dense(Dense::init(dim, 1, rng)?));
        Self::finish(NetFamily::Lstm, window_n, features, stages)
    }

    pub fn lrcn<R: Rng>(
        window_n: usize,
        features: usize,
        cfg: &LrcnConfig,
        rng: &mut R,
    ) -> Result<Self> {
        for (name, v) in [
            ("conv1 filters", cfg.conv1_filters),
            ("conv1 kernel", cfg.conv1_kernel),
            ("conv2 filters", cfg.conv2_filters),
            ("conv2 kernel", cfg.conv2_kernel),
            ("conv stride", cfg.stride),
        ] {
            positive(name, v)?;
        }
        if cfg.hidden.len() != 2 {
            log::debug!("lrcn with {} recurrent layers", cfg.hidden.len());
        }
        let mut stages = vec![
            Stage::Conv1d(Conv1d::init(
                features,
                cfg.conv1_filters,
                cfg.conv1_kernel,
                cfg.stride,
                cfg.padding,
                rng,
            )?),
            Stage::Relu(Relu::new()),
            Stage::Conv1d(Conv1d::init(
                cfg.conv1_filters,
                cfg.conv2_filters,
                cfg.conv2_kernel,
                cfg.stride,
                cfg.padding,
                rng,
            )?),
            Stage::Relu(Relu::new()),
        ];
        if let Some(size) = cfg.pool {
            stages.push(Stage::MaxPool(MaxPool1d::new(size, cfg.conv2_filters)?));
        }
        let dim = recurrent_stack(&mut stages, cfg.conv2_filters, &cfg.hidden, cfg.cell, rng)?;
        stages.push(Stage::Dense(Dense::init(dim, 1, rng)?));
        Self::finish(NetFamily::Lrcn, window_n, features, stages)
    }

    pub fn input_len(&self) -> usize {
        self.window_n * self.features
    }

    fn check(&self, inputs: &[f64]) -> Result<()> {
        if inputs.len() != self.input_len() {
            return Err(Error::shape(format!(
                "{} expects a [{} x {}] window but got {} values",
                self.family,
                self.window_n,
                self.features,
                inputs.len()
            )));
        }
        Ok(())
    }

    pub fn predict(&self, inputs: &[f64]) -> Result<f64> {
        self.check(inputs)?;
        Ok(self.body.forward(inputs)?[0])
    }

    pub fn forward_train(&mut self, inputs: &[f64]) -> Result<f64> {
        self.check(inputs)?;
        Ok(self.body.forward_train(inputs)?[0])
    }

    /// Backpropagates `d loss / d output`, accumulating parameter gradients.
    pub fn backward(&mut self, d_out: f64) -> Result<Vec<f64>> {
        self.body.backward(&[d_out])
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.body.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.body.params_mut()
    }

    pub fn zero_grad(&mut self) {
        self.body.zero_grad();
    }

    pub fn param_count(&self) -> usize {
        self.body.param_count()
    }
}
