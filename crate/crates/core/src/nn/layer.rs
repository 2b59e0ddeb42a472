use super::tensor::Tensor;
use crate::error::Result;

/// A differentiable stage operating on flat row-major buffers.
///
/// `forward` is pure and may be called concurrently. `forward_train`
/// caches whatever `backward` needs; `backward` consumes that cache,
/// accumulates parameter gradients in place and returns the gradient
/// with respect to the input. Calling `backward` without a cached forward
/// is a state error.
pub trait Layer {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>>;

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>>;

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>>;

    fn params(&self) -> Vec<&Tensor> {
        Vec::new()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        Vec::new()
    }

    /// Length of the flat output for a flat input of `input_len` values.
    fn output_len(&self, input_len: usize) -> Result<usize>;
}
