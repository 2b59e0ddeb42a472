use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::{sigmoid_scalar, tanh_scalar};
use super::layer::Layer;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Which recurrence a cell implements.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    /// Forget, input and output gates plus a tanh candidate;
    /// `c' = f*c + i*g`, `h' = o * tanh(c')`.
    #[default]
    StandardLstm,
    /// Single update gate `z = sigmoid(W_z [h, x] + b_z)` interpolating
    /// between the previous output and a tanh candidate:
    /// `h' = (1 - z) * h + z * tanh(W_h [h, x] + b_h)`. No cell state.
    PaperGate,
}

impl CellKind {
    pub fn gate_count(self) -> usize {
        match self {
            CellKind::StandardLstm => 4,
            CellKind::PaperGate => 2,
        }
    }
}

/// Weights over the concatenation `[h_prev, x]`, shape
/// `[(hidden + input) x hidden]`, and bias `[hidden]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gate {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Output and cell state carried between time steps.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrentState {
    pub h: Vec<f64>,
    /// Always zero for [`CellKind::PaperGate`].
    pub c: Vec<f64>,
}

impl RecurrentState {
    pub fn zeros(hidden_dim: usize) -> Self {
        RecurrentState {
            h: vec![0.0; hidden_dim],
            c: vec![0.0; hidden_dim],
        }
    }
}

/// Gate order: `StandardLstm` = [forget, input, output, candidate];
/// `PaperGate` = [update, candidate].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecurrentCell {
    pub kind: CellKind,
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub gates: Vec<Gate>,
}

#[derive(Debug, Clone)]
struct StepCache {
    concat: Vec<f64>,
    /// Post-activation gate outputs, one vector per gate.
    acts: Vec<Vec<f64>>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl RecurrentCell {
    pub fn from_gates(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        gates: Vec<Gate>,
    ) -> Result<Self> {
        if hidden_dim == 0 || input_dim == 0 {
            return Err(Error::config(
                "recurrent input and hidden dims must be positive",
            ));
        }
        if gates.len() != kind.gate_count() {
            return Err(Error::shape(format!(
                "{kind:?} cell needs {} gates, got {}",
                kind.gate_count(),
                gates.len()
            )));
        }
        let rows = hidden_dim + input_dim;
        for g in &gates {
            if g.weights.shape() != [rows, hidden_dim] || g.bias.shape() != [hidden_dim] {
                return Err(Error::shape(format!(
                    "gate weights {:?} / bias {:?} do not match [{rows} x {hidden_dim}] / [{hidden_dim}]",
                    g.weights.shape(),
                    g.bias.shape()
                )));
            }
        }
        Ok(RecurrentCell {
            kind,
            input_dim,
            hidden_dim,
            gates,
        })
    }

    /// Uniform weights in `+-sqrt(1/hidden)`, zero biases except the
    /// standard LSTM forget gate, which starts at 1.
    pub fn init<R: Rng>(
        kind: CellKind,
        input_dim: usize,
        hidden_dim: usize,
        rng: &mut R,
    ) -> Result<Self> {
        let limit = (1.0 / hidden_dim as f64).sqrt();
        let rows = hidden_dim + input_dim;
        let gates = (0..kind.gate_count())
            .map(|gi| {
                let w = (0..rows * hidden_dim)
                    .map(|_| rng.random_range(-limit..=limit))
                    .collect();
                let b = if kind == CellKind::StandardLstm && gi == 0 {
                    1.0
                } else {
                    0.0
                };
                Ok(Gate {
                    weights: Tensor::new(vec![rows, hidden_dim], w)?,
                    bias: Tensor::filled(&[hidden_dim], b)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        RecurrentCell::from_gates(kind, input_dim, hidden_dim, gates)
    }

    /// Cell with every weight and bias zero.
    pub fn zeroed(kind: CellKind, input_dim: usize, hidden_dim: usize) -> Result<Self> {
        let rows = hidden_dim + input_dim;
        let gates = (0..kind.gate_count())
            .map(|_| {
                Ok(Gate {
                    weights: Tensor::zeros(&[rows, hidden_dim])?,
                    bias: Tensor::zeros(&[hidden_dim])?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        RecurrentCell::from_gates(kind, input_dim, hidden_dim, gates)
    }

    /// One recurrence step.
    pub fn step(&self, x: &[f64], state: &RecurrentState) -> Result<RecurrentState> {
        self.check_step(x, state)?;
        let (next, _) = self.step_inner(x, &state.h, &state.c);
        Ok(next)
    }

    fn check_step(&self, x: &[f64], state: &RecurrentState) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::shape(format!(
                "recurrent cell expects input [{}] but got [{}]",
                self.input_dim,
                x.len()
            )));
        }
        if state.h.len() != self.hidden_dim || state.c.len() != self.hidden_dim {
            return Err(Error::shape(format!(
                "recurrent state [{}]/[{}] does not match hidden dim {}",
                state.h.len(),
                state.c.len(),
                self.hidden_dim
            )));
        }
        Ok(())
    }

    fn step_inner(&self, x: &[f64], h: &[f64], c: &[f64]) -> (RecurrentState, StepCache) {
        let hd = self.hidden_dim;
        let mut concat = Vec::with_capacity(hd + self.input_dim);
        concat.extend_from_slice(h);
        concat.extend_from_slice(x);

        let pre: Vec<Vec<f64>> = self
            .gates
            .iter()
            .map(|g| {
                let w = g.weights.values();
                let mut out = g.bias.values().to_vec();
                for (i, &v) in concat.iter().enumerate() {
                    if v == 0.0 {
                        continue;
                    }
                    let row = &w[i * hd..(i + 1) * hd];
                    for (o, &wij) in out.iter_mut().zip(row) {
                        *o += wij * v;
                    }
                }
                out
            })
            .collect();

        match self.kind {
            CellKind::PaperGate => {
                let z: Vec<f64> = pre[0].iter().map(|&a| sigmoid_scalar(a)).collect();
                let cand: Vec<f64> = pre[1].iter().map(|&a| tanh_scalar(a)).collect();
                let h_new = (0..hd)
                    .map(|j| (1.0 - z[j]) * h[j] + z[j] * cand[j])
                    .collect();
                let state = RecurrentState {
                    h: h_new,
                    c: vec![0.0; hd],
                };
                let cache = StepCache {
                    concat,
                    acts: vec![z, cand],
                    h_prev: h.to_vec(),
                    c_prev: c.to_vec(),
                    tanh_c: Vec::new(),
                };
                (state, cache)
            }
            CellKind::StandardLstm => {
                let f: Vec<f64> = pre[0].iter().map(|&a| sigmoid_scalar(a)).collect();
                let i: Vec<f64> = pre[1].iter().map(|&a| sigmoid_scalar(a)).collect();
                let o: Vec<f64> = pre[2].iter().map(|&a| sigmoid_scalar(a)).collect();
                let g: Vec<f64> = pre[3].iter().map(|&a| tanh_scalar(a)).collect();
                let c_new: Vec<f64> = (0..hd).map(|j| f[j] * c[j] + i[j] * g[j]).collect();
                let tanh_c: Vec<f64> = c_new.iter().map(|&v| tanh_scalar(v)).collect();
                let h_new = (0..hd).map(|j| o[j] * tanh_c[j]).collect();
                let state = RecurrentState { h: h_new, c: c_new };
                let cache = StepCache {
                    concat,
                    acts: vec![f, i, o, g],
                    h_prev: h.to_vec(),
                    c_prev: c.to_vec(),
                    tanh_c,
                };
                (state, cache)
            }
        }
    }

    /// Backward through one step. Returns `(d_x, d_h_prev, d_c_prev)`.
    fn step_backward(
        &mut self,
        cache: &StepCache,
        dh: &[f64],
        dc_next: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let hd = self.hidden_dim;
        let mut dh_prev_direct = vec![0.0; hd];
        let mut dc_prev = vec![0.0; hd];
        let dpre: Vec<Vec<f64>> = match self.kind {
            CellKind::PaperGate => {
                let (z, cand) = (&cache.acts[0], &cache.acts[1]);
                let mut dz = vec![0.0; hd];
                let mut dcand = vec![0.0; hd];
                for j in 0..hd {
                    dz[j] = dh[j] * (cand[j] - cache.h_prev[j]) * z[j] * (1.0 - z[j]);
                    dcand[j] = dh[j] * z[j] * (1.0 - cand[j] * cand[j]);
                    dh_prev_direct[j] = dh[j] * (1.0 - z[j]);
                }
                vec![dz, dcand]
            }
            CellKind::StandardLstm => {
                let (f, i, o, g) = (
                    &cache.acts[0],
                    &cache.acts[1],
                    &cache.acts[2],
                    &cache.acts[3],
                );
                let mut d = vec![vec![0.0; hd]; 4];
                for j in 0..hd {
                    let tc = cache.tanh_c[j];
                    let dc = dc_next[j] + dh[j] * o[j] * (1.0 - tc * tc);
                    d[0][j] = dc * cache.c_prev[j] * f[j] * (1.0 - f[j]);
                    d[1][j] = dc * g[j] * i[j] * (1.0 - i[j]);
                    d[2][j] = dh[j] * tc * o[j] * (1.0 - o[j]);
                    d[3][j] = dc * i[j] * (1.0 - g[j] * g[j]);
                    dc_prev[j] = dc * f[j];
                }
                d
            }
        };

        let mut dconcat = vec![0.0; cache.concat.len()];
        for (gate, da) in self.gates.iter_mut().zip(&dpre) {
            for (gb, &d) in gate.bias.grad_mut().iter_mut().zip(da) {
                *gb += d;
            }
            let (w, gw) = gate.weights.values_and_grad_mut();
            for (r, &v) in cache.concat.iter().enumerate() {
                let row = &w[r * hd..(r + 1) * hd];
                let grow = &mut gw[r * hd..(r + 1) * hd];
                let mut acc = 0.0;
                for j in 0..hd {
                    grow[j] += v * da[j];
                    acc += row[j] * da[j];
                }
                dconcat[r] += acc;
            }
        }
        let dx = dconcat.split_off(hd);
        let dh_prev = dconcat
            .iter()
            .zip(&dh_prev_direct)
            .map(|(a, b)| a + b)
            .collect();
        (dx, dh_prev, dc_prev)
    }
}

/// A recurrent cell unrolled over a `[len x input_dim]` sequence from a
/// zero state, emitting every step's output as `[len x hidden_dim]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecurrentLayer {
    pub cell: RecurrentCell,
    #[serde(skip)]
    cache: Option<Vec<StepCache>>,
}

impl PartialEq for RecurrentLayer {
    fn eq(&self, other: &Self) -> bool {
        self.cell == other.cell
    }
}

impl RecurrentLayer {
    pub fn new(cell: RecurrentCell) -> Self {
        RecurrentLayer { cell, cache: None }
    }

    fn steps(&self, input_len: usize) -> Result<usize> {
        let d = self.cell.input_dim;
        if input_len == 0 || !input_len.is_multiple_of(d) {
            return Err(Error::shape(format!(
                "recurrent input of {input_len} values is not a [len x {d}] matrix"
            )));
        }
        Ok(input_len / d)
    }

    fn run(&self, input: &[f64], mut caches: Option<&mut Vec<StepCache>>) -> Result<Vec<f64>> {
        let len = self.steps(input.len())?;
        let (d, hd) = (self.cell.input_dim, self.cell.hidden_dim);
        let mut state = RecurrentState::zeros(hd);
        let mut out = Vec::with_capacity(len * hd);
        for t in 0..len {
            let (next, cache) =
                self.cell
                    .step_inner(&input[t * d..(t + 1) * d], &state.h, &state.c);
            out.extend_from_slice(&next.h);
            if let Some(c) = caches.as_deref_mut() {
                c.push(cache);
            }
            state = next;
        }
        Ok(out)
    }
}

impl Layer for RecurrentLayer {
    fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.run(input, None)
    }

    fn forward_train(&mut self, input: &[f64]) -> Result<Vec<f64>> {
        let mut caches = Vec::new();
        let out = self.run(input, Some(&mut caches))?;
        self.cache = Some(caches);
        Ok(out)
    }

    fn backward(&mut self, upstream: &[f64]) -> Result<Vec<f64>> {
        let caches = self
            .cache
            .take()
            .ok_or_else(|| Error::State("recurrent backward without a preceding forward".into()))?;
        let (d, hd) = (self.cell.input_dim, self.cell.hidden_dim);
        if upstream.len() != caches.len() * hd {
            return Err(Error::shape(format!(
                "recurrent upstream gradient [{}] does not match output [{} x {hd}]",
                upstream.len(),
                caches.len()
            )));
        }
        let mut grad_in = vec![0.0; caches.len() * d];
        let mut dh_next = vec![0.0; hd];
        let mut dc_next = vec![0.0; hd];
        for (t, cache) in caches.iter().enumerate().rev() {
            let dh: Vec<f64> = upstream[t * hd..(t + 1) * hd]
                .iter()
                .zip(&dh_next)
                .map(|(a, b)| a + b)
                .collect();
            let (dx, dh_prev, dc_prev) = self.cell.step_backward(cache, &dh, &dc_next);
            grad_in[t * d..(t + 1) * d].copy_from_slice(&dx);
            dh_next = dh_prev;
            dc_next = dc_prev;
        }
        Ok(grad_in)
    }

    fn params(&self) -> Vec<&Tensor> {
        self.cell
            .gates
            .iter()
            .flat_map(|g| [&g.weights, &g.bias])
            .collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.cell
            .gates
            .iter_mut()
            .flat_map(|g| [&mut g.weights, &mut g.bias])
            .collect()
    }

    fn output_len(&self, input_len: usize) -> Result<usize> {
        Ok(self.steps(input_len)? * self.cell.hidden_dim)
    }
}
