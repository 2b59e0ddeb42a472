use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layer::Layer;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// 1D cross-correlation over a `[len x channels]` input, zero padded:
///
/// `out[i][f] = sum_{c,k} input[i*stride + k - padding][c] * kernels[f][c][k] + bias[f]`
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Conv1d {
    /// `[filters x in_channels x kernel_len]`
    pub kernels: Tensor,
    /// `[filters]`
    pub bias: Tensor,
    pub stride: usize,
    pub padding: usize,
    #[serde(skip)]
    cache: Option<Vec<f64>>,
}

impl PartialEq for Conv1d {
    fn eq(&self, other: &Self) -> bool {
        self.kernels == other.kernels
            && self.bias == other.bias
            && self.stride == other.stride
            && self.padding == other.padding
    }
}

impl Conv1d {
    pub fn from_params(
        kernels: Tensor,
        bias: Tensor,
        stride: usize,
        padding: usize,
    ) -> Result<Self> {
        let (k, b) = (kernels.shape(), bias.shape());
        if k.len() != 3 || b.len() != 1 || k[0] != b[0] {
            return Err(Error::shape(format!(
                "conv kernels {k:?} and bias {b:?} are inconsistent"
            )));
        }
        if stride == 0 {
            return Err(Error::config("conv stride must be positive"));
        }
        Ok(Conv1d {
            kernels,
            bias,
            stride,
            padding,
            cache: None,
        })
    }

    pub fn init<R: Rng>(
        in_channels: usize,
        filters: usize,
        kernel_len: usize,
        stride: usize,
        padding: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let fan_in = in_channels * kernel_len;
        let fan_out = filters * kernel_len;
        let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
        let values = (0..filters * in_channels * kernel_len)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        Conv1d::from_params(
            Tensor::new(vec![filters, in_channels, kernel_len], values)?,
            Tensor::zeros(&[filters])?,
            stride,
            padding,
        )
    }

    pub fn filters(&self) -> usize {
        self.kernels.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.kernels.shape()[1]
    }

    pub fn kernel_len(&self) -> usize {
        self.kernels.shape()[2]
    }

    /// Output sequence length for an input of `in_len` time steps.
    pub fn out_steps(&self, in_len: usize) -> Result<usize> {
        let span = in_len + 2 * self.padding;
        let k = self.kernel_len();
        if span < k {
            return Err(Error::config(format!(
                "conv kernel of length {k} does not fit input of length {in_len} with padding {}",
                self.padding
            )));
        }
        Ok((span - k) / self.stride + 1)
    }

    fn in_steps(&self, input_len: usize) -> Result<usize> {
        let c = self.in_channels();
        if input_len == 0 || !input_len.is_multiple_of(c) {
            return Err(Error::shape(format!(
                "conv input of {input_len} values is not a [len x {c}] matrix"
            )));
        }
        Ok(input_len / c)
    }

    /// Input row feeding output step `i` through tap `k`, if not in padding.
    #[inline]
    fn source_row(&self, i: usize, k: usize, in_len: usize) -> Option<usize> {
        let pos = (i * self.stride + k).checked_sub(self.padding)?;
        (pos < in_len).then_some(pos)
    }
}

impl Layer for Conv1d {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        let in_len = self.in_steps(input.len())?;
        let out_len = self.out_steps(in_len)?;
        let (nf, nc, nk) = (self.filters(), self.in_channels(), self.kernel_len());
        let kern = self.kernels.values();
        let bias = self.bias.values();
        let mut out = vec![0.0; out_len * nf];
        for i in 0..out_len {
            let orow = &mut out[i * nf..(i + 1) * nf];
            orow.copy_from_slice(bias);
            for k in 0..nk {
                let Some(pos) = self.source_row(i, k, in_len) else {
                    continue;
                };
                let irow = &input[pos * nc..(pos + 1) * nc];
                for (f, o) in orow.iter_mut().enumerate() {
                    let fk = &kern[f * nc * nk..(f + 1) * nc * nk];
                    let mut acc = 0.0;
                    for (c, &x) in irow.iter().enumerate() {
                        acc += x * fk[c * nk + k];
                    }
                    *o += acc;
                }
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
            .ok_or_else(|| Error::State("conv1d backward without a preceding forward".into()))?;
        let in_len = self.in_steps(input.len())?;
        let out_len = self.out_steps(in_len)?;
        let (nf, nc, nk) = (self.filters(), self.in_channels(), self.kernel_len());
        if upstream.len() != out_len * nf {
            return Err(Error::shape(format!(
                "conv upstream gradient [{}] does not match output [{out_len} x {nf}]",
                upstream.len()
            )));
        }
        let mut grad_in = vec![0.0; input.len()];
        {
            let gb = self.bias.grad_mut();
            for i in 0..out_len {
                for f in 0..nf {
                    gb[f] += upstream[i * nf + f];
                }
            }
        }
        let (kern, gk) = self.kernels.values_and_grad_mut();
        for i in 0..out_len {
            let grow = &upstream[i * nf..(i + 1) * nf];
            for k in 0..nk {
                let pos = match (i * self.stride + k).checked_sub(self.padding) {
                    Some(p) if p < in_len => p,
                    _ => continue,
                };
                let irow = &input[pos * nc..(pos + 1) * nc];
                let girow = &mut grad_in[pos * nc..(pos + 1) * nc];
                for (f, &g) in grow.iter().enumerate() {
                    if g == 0.0 {
                        continue;
                    }
                    let base = f * nc * nk;
                    for c in 0..nc {
                        gk[base + c * nk + k] += g * irow[c];
                        girow[c] += g * kern[base + c * nk + k];
                    }
                }
            }
        }
        Ok(grad_in)
    }

    fn params(&self) -> Vec<&Tensor> {
        vec![&self.kernels, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        vec![&mut self.kernels, &mut self.bias]
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        Ok(self.out_steps(self.in_steps(input_len)?)? * self.filters())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn conv(kernel: Vec<f64>, bias: f64, stride: usize, padding: usize) -> Conv1d {
        let k = kernel.len();
        Conv1d::from_params(
            Tensor::new(vec![1, 1, k], kernel).unwrap(),
            Tensor::from_vec(vec![bias]).unwrap(),
            stride,
            padding,
        )
        .unwrap()
    }

    #[test]
    fn identity_kernel() {
        let c = conv(vec![1.0], 0.0, 1, 0);
        assert_eq!(
            c.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![1.0, 2.0, 3.0, 4.0]
        );
    }

    #[test]
    fn bias_broadcasts_over_zero_input() {
        let c = conv(vec![0.3, -0.1], 0.7, 1, 0);
        assert_eq!(c.forward(&[0.0; 5]).unwrap(), vec![0.7; 4]);
    }

    #[test]
    fn difference_kernel_is_cross_correlation() {
        // out[i] = x[i] - x[i+1]
        let c = conv(vec![1.0, -1.0], 0.0, 1, 0);
        assert_eq!(
            c.forward(&[1.0, 2.0, 3.0, 4.0]).unwrap(),
            vec![-1.0, -1.0, -1.0]
        );
    }

    #[test]
    fn padding_and_stride_lengths() {
        let c = conv(vec![1.0, 1.0, 1.0], 0.0, 2, 1);
        // floor((5 + 2 - 3) / 2) + 1 = 3
        let out = c.forward(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert_eq!(out, vec![3.0, 9.0, 9.0]);
    }

    #[test]
    fn kernel_longer_than_input_is_config_error() {
        let c = conv(vec![1.0; 4], 0.0, 1, 0);
        assert!(matches!(c.forward(&[1.0, 2.0]), Err(Error::Config(_))));
    }

    #[test]
    fn multi_channel_brute_force() {
        let mut rng = rand::rng();
        let (len, nc, nf, nk) = (6, 3, 2, 3);
        let c = Conv1d::init(nc, nf, nk, 1, 1, &mut rng).unwrap();
        let input: Vec<f64> = (0..len * nc).map(|v| (v as f64 * 0.37).sin()).collect();
        let out = c.forward(&input).unwrap();
        let kv = c.kernels.values();
        for i in 0..len {
            for f in 0..nf {
                let mut s = 0.0;
                for k in 0..nk {
                    let p = i as isize + k as isize - 1;
                    if p < 0 || p >= len as isize {
                        continue;
                    }
                    for ch in 0..nc {
                        s += input[p as usize * nc + ch] * kv[f * nc * nk + ch * nk + k];
                    }
                }
                assert!((out[i * nf + f] - s).abs() < 1e-12);
            }
        }
    }
}
