use serde::{Deserialize, Serialize};

use super::conv1d::Conv1d;
use super::dense::Dense;
use super::layer::Layer;
use super::ops::{LastStep, MaxPool1d, Relu};
use super::recurrent::RecurrentLayer;
use super::tensor::Tensor;
use crate::error::Result;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Stage {
    Dense(Dense),
    Conv1d(Conv1d),
    Recurrent(RecurrentLayer),
    Relu(Relu),
    MaxPool(MaxPool1d),
    LastStep(LastStep),
}

impl Stage {
    fn as_layer(&self) -> &dyn Layer {
        match self {
            Stage::Dense(l) => l,
            Stage::Conv1d(l) => l,
            Stage::Recurrent(l) => l,
            Stage::Relu(l) => l,
            Stage::MaxPool(l) => l,
            Stage::LastStep(l) => l,
        }
    }

    fn as_layer_mut(&mut self) -> &mut dyn Layer {
        match self {
            Stage::Dense(l) => l,
            Stage::Conv1d(l) => l,
            Stage::Recurrent(l) => l,
            Stage::Relu(l) => l,
            Stage::MaxPool(l) => l,
            Stage::LastStep(l) => l,
        }
    }
}

/// A chain of stages applied in order.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Sequential {
    pub stages: Vec<Stage>,
}

impl Sequential {
    pub fn new(stages: Vec<Stage>) -> Self {
        Sequential { stages }
    }

    pub fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }
}

impl Layer for Sequential {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        for s in &self.stages {
            x = s.as_layer().forward(&x)?;
        }
        Ok(x)
    }

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let mut x = input.to_vec();
        for s in &mut self.stages {
            x = s.as_layer_mut().forward_train(&x)?;
        }
        Ok(x)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let mut g = upstream.to_vec();
        for s in self.stages.iter_mut().rev() {
            g = s.as_layer_mut().backward(&g)?;
        }
        Ok(g)
    }

    fn params(&self) -> Vec<&Tensor> {
        self.stages
            .iter()
            .flat_map(|s| s.as_layer().params())
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.stages
            .iter_mut()
            .flat_map(|s| s.as_layer_mut().params_mut())
            .collect()
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        self.stages
            .iter()
            .try_fold(input_len, |len, s| s.as_layer().output_len(len))
    }
}
