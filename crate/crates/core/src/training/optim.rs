use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::Tensor;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    #[default]
    Adam,
}

/// First-order update rule over a fixed, ordered parameter list.
#[derive(Debug, Clone)]
pub enum Optimizer {
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: i32,
        m: Vec<Vec<f64>>,
        v: Vec<Vec<f64>>,
    },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, beta1: f64, beta2: f64) -> Self {
        match kind {
            OptimizerKind::Sgd => Optimizer::Sgd,
            OptimizerKind::Adam => Optimizer::Adam {
                beta1,
                beta2,
                eps: 1e-8,
                t: 0,
                m: Vec::new(),
                v: Vec::new(),
            },
        }
    }

    /// Applies one update from the gradients accumulated in `params`.
    pub fn step(&mut self, params: Vec<&mut Tensor>, lr: f64) -> Result<()> {
        match self {
            Optimizer::Sgd => {
                for p in params {
                    let (values, grad) = p.values_and_grad_mut();
                    for (w, g) in values.iter_mut().zip(grad.iter()) {
                        *w -= lr * g;
                    }
                }
            }
            Optimizer::Adam {
                beta1,
                beta2,
                eps,
                t,
                m,
                v,
            } => {
                if m.is_empty() {
                    *m = params.iter().map(|p| vec![0.0; p.len()]).collect();
                    *v = m.clone();
                }
                if m.len() != params.len() {
                    return Err(Error::State(format!(
                        "optimizer tracks {} tensors but got {}",
                        m.len(),
                        params.len()
                    )));
                }
                *t += 1;
                let c1 = 1.0 - beta1.powi(*t);
                let c2 = 1.0 - beta2.powi(*t);
                for ((p, m), v) in params.into_iter().zip(m.iter_mut()).zip(v.iter_mut()) {
                    let (values, grad) = p.values_and_grad_mut();
                    if m.len() != values.len() {
                        return Err(Error::shape(
                            "optimizer state does not match parameter size",
                        ));
                    }
                    for i in 0..values.len() {
                        let g = grad[i];
                        m[i] = *beta1 * m[i] + (1.0 - *beta1) * g;
                        v[i] = *beta2 * v[i] + (1.0 - *beta2) * g * g;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        values[i] -= lr * m_hat / (v_hat.sqrt() + *eps);
                    }
                }
            }
        }
        Ok(())
    }
}
