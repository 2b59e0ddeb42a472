use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Fully connected layer: `out[j] = sum_i weights[i][j] * input[i] + bias[j]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Dense {
    /// `[in_dim x out_dim]`
    pub weights: Tensor,
    /// `[out_dim]`
    pub bias: Tensor,
    #[serde(skip)]
    cache: Option<Vec<f64>>,
}

impl PartialEq for Dense {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights && self.bias == other.bias
    }
}

impl Dense {
    pub fn from_params(weights: Tensor, bias: Tensor) -> Result<Self> {
        let (w, b) = (weights.shape(), bias.shape());
        if w.len() != 2 || b.len() != 1 || w[1] != b[0] {
            return Err(Error::shape(format!(
                "dense weights {w:?} and bias {b:?} are inconsistent"
            )));
        }
        Ok(Dense {
            weights,
            bias,
            cache: None,
        })
    }

    /// Glorot-uniform weights, zero bias.
    pub fn init<R: Rng>(in_dim: usize, out_dim: usize, rng: &mut R) -> Result<Self> {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let values = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Dense::from_params(
            Tensor::new(vec![in_dim, out_dim], values)?,
            Tensor::zeros(&[out_dim])?,
        )
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.in_dim() {
            return Err(Error::shape(format!(
                "dense layer expects input [{}] but got [{}]",
                self.in_dim(),
                input.len()
            )));
        }
        Ok(())
    }
}

impl Layer for Dense {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let out_dim = self.out_dim();
        let w = self.weights.values();
        let mut out = self.bias.values().to_vec();
        for (i, &x) in input.iter().enumerate() {
            if x == 0.0 {
                continue;
            }
            let row = &w[i * out_dim..(i + 1) * out_dim];
            for (o, &wij) in out.iter_mut().zip(row) {
                *o += wij * x;
            }
        }
        Ok(out)
    }

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward(input)?;
        self.cache = Some(input.to_vec());
        Ok(out)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let input = self
            .cache
            .take()
            .ok_or_else(|| Error::State("dense backward without a preceding forward".into()))?;
        let out_dim = self.out_dim();
        if upstream.len() != out_dim {
            return Err(Error::shape(format!(
                "dense upstream gradient [{}] does not match output [{out_dim}]",
                upstream.len()
            )));
        }
        for (gb, &g) in self.bias.grad_mut().iter_mut().zip(upstream) {
            *gb += g;
        }
        let (w, gw) = self.weights.values_and_grad_mut();
        let mut grad_in = vec![0.0; input.len()];
        for (i, &x) in input.iter().enumerate() {
            let row = &w[i * out_dim..(i + 1) * out_dim];
            let grow = &mut gw[i * out_dim..(i + 1) * out_dim];
            let mut acc = 0.0;
            for j in 0..out_dim {
                grow[j] += x * upstream[j];
                acc += row[j] * upstream[j];
            }
            grad_in[i] = acc;
        }
        Ok(grad_in)
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.weights, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.weights, &mut self.bias]
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        if input_len != self.in_dim() {
            return Err(Error::shape(format!(
                "dense layer expects input [{}] but got [{input_len}]",
                self.in_dim()
            )));
        }
        Ok(self.out_dim())
    }
}
