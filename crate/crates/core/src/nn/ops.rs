//! Parameter-free stages: ReLU, max pooling over time, last-step selection.

use serde::{Deserialize, Serialize};

use super::activation::relu_scalar;
use super::layer::Layer;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Relu {
    #[serde(skip)]
    cache: Option<Vec<f64>>,
}

impl PartialEq for Relu {
    fn eq(&self, _other: &Self) -> bool {
        true
    }
}

impl Relu {
    pub fn new() -> Self {
        Relu::default()
    }
}

impl Layer for Relu {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(input.iter().map(|&x| relu_scalar(x)).collect())
    }

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        self.cache = Some(input.to_vec());
        self.forward(input)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let input = self
            .cache
            .take()
            .ok_or_else(|| Error::State("relu backward without a preceding forward".into()))?;
        if input.len() != upstream.len() {
            return Err(Error::shape(format!(
                "relu upstream gradient [{}] does not match input [{}]",
                upstream.len(),
                input.len()
            )));
        }
        Ok(input
            .iter()
            .zip(upstream)
            .map(|(&x, &g)| if x > 0.0 { g } else { 0.0 })
            .collect())
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        Ok(input_len)
    }
}

/// Non-overlapping max pooling along the time axis of a `[len x channels]`
/// input. A trailing partial window is dropped.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MaxPool1d {
    pub size: usize,
    pub channels: usize,
    #[serde(skip)]
    cache: Option<(usize, Vec<usize>)>,
}

impl PartialEq for MaxPool1d {
    fn eq(&self, other: &Self) -> bool {
        self.size == other.size && self.channels == other.channels
    }
}

impl MaxPool1d {
    pub fn new(size: usize, channels: usize) -> Result<Self> {
        if size == 0 || channels == 0 {
            return Err(Error::config(
                "pool size and channel count must be positive",
            ));
        }
        Ok(MaxPool1d {
            size,
            channels,
            cache: None,
        })
    }

    fn steps(&self, input_len: usize) -> Result<(usize, usize)> {
        if !input_len.is_multiple_of(self.channels) {
            return Err(Error::shape(format!(
                "pool input of {input_len} values is not a [len x {}] matrix",
                self.channels
            )));
        }
        let in_steps = input_len / self.channels;
        let out_steps = in_steps / self.size;
        if out_steps == 0 {
            return Err(Error::config(format!(
                "pool size {} exceeds sequence length {in_steps}",
                self.size
            )));
        }
        Ok((in_steps, out_steps))
    }

    fn pool(&self, input: &[f64]) -> Result<(Vec<f64>, Vec<usize>)> {
        let (_, out_steps) = self.steps(input.len())?;
        let nc = self.channels;
        let mut out = vec![f64::NEG_INFINITY; out_steps * nc];
        let mut arg = vec![0; out_steps * nc];
        for o in 0..out_steps {
            for s in 0..self.size {
                let row = o * self.size + s;
                for c in 0..nc {
                    let v = input[row * nc + c];
                    if v > out[o * nc + c] {
                        out[o * nc + c] = v;
                        arg[o * nc + c] = row * nc + c;
                    }
                }
            }
        }
        Ok((out, arg))
    }
}

impl Layer for MaxPool1d {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        Ok(self.pool(input)?.0)
    }

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let (out, arg) = self.pool(input)?;
        self.cache = Some((input.len(), arg));
        Ok(out)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let (input_len, arg) = self
            .cache
            .take()
            .ok_or_else(|| Error::State("pool backward without a preceding forward".into()))?;
        if upstream.len() != arg.len() {
            return Err(Error::shape("pool upstream gradient does not match output"));
        }
        let mut grad = vec![0.0; input_len];
        for (&src, &g) in arg.iter().zip(upstream) {
            grad[src] += g;
        }
        Ok(grad)
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        Ok(self.steps(input_len)?.1 * self.channels)
    }
}

/// Keeps only the final row of a `[len x width]` sequence.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LastStep {
    pub width: usize,
    #[serde(skip)]
    cache: Option<usize>,
}

impl PartialEq for LastStep {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
    }
}

impl LastStep {
    pub fn new(width: usize) -> Self {
        LastStep { width, cache: None }
    }

    fn check(&self, input_len: usize) -> Result<()> {
        if input_len == 0 || !input_len.is_multiple_of(self.width) {
            return Err(Error::shape(format!(
                "sequence of {input_len} values is not a [len x {}] matrix",
                self.width
            )));
        }
        Ok(())
    }
}

impl Layer for LastStep {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check(input.len())?;
        Ok(input[input.len() - self.width..].to_vec())
    }

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let out = self.forward(input)?;
        self.cache = Some(input.len());
        Ok(out)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let input_len = self
            .cache
            .take()
            .ok_or_else(|| Error::State("last-step backward without a preceding forward".into()))?;
        if upstream.len() != self.width {
            return Err(Error::shape("last-step upstream gradient has wrong width"));
        }
        let mut grad = vec![0.0; input_len];
        grad[input_len - self.width..].copy_from_slice(upstream);
        Ok(grad)
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        self.check(input_len)?;
        Ok(self.width)
    }
}
