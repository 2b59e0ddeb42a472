//! Linear epsilon-insensitive support vector regression.
//!
//! The soft-margin problem
//!
//! ```text
//! minimize  1/2 |w|^2 + C * sum_i max(0, |y_i - <w, x_i> - b| - eps)
//! ```
//!
//! is solved in its dual form with sequential minimal optimization
//! (maximal-gain second-order working-set selection), which reaches the
//! tube constraints to within the configured KKT tolerance. `b` is left
//! unregularized.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvrConfig {
    /// Tube half-width, in target units.
    pub epsilon: f64,
    /// Slack penalty `C`.
    pub c_penalty: f64,
    /// Stop once the maximal KKT violation drops below this.
    pub tolerance: f64,
    pub max_iters: usize,
}

impl Default for SvrConfig {
    fn default() -> Self {
        SvrConfig {
            epsilon: 0.01,
            c_penalty: 1.0,
            tolerance: 1e-3,
            max_iters: 1_000_000,
        }
    }
}

impl SvrConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(Error::config(format!(
                "svr epsilon must be >= 0, got {}",
                self.epsilon
            )));
        }
        if !(self.c_penalty > 0.0) || !self.c_penalty.is_finite() {
            return Err(Error::config(format!(
                "svr C must be > 0, got {}",
                self.c_penalty
            )));
        }
        if !(self.tolerance > 0.0) {
            return Err(Error::config("svr tolerance must be > 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub w: Vec<f64>,
    pub b: f64,
    pub epsilon: f64,
    pub c_penalty: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrFitInfo {
    pub iterations: usize,
    pub converged: bool,
    /// Dual objective sampled during optimization; non-increasing.
    pub dual_objective: Vec<f64>,
}

impl SvrModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.w.len() {
            return Err(Error::shape(format!(
                "svr expects [{}] features but got [{}]",
                self.w.len(),
                x.len()
            )));
        }
        Ok(dot(&self.w, x) + self.b)
    }

    /// `1/2 |w|^2 + C * sum of epsilon-insensitive losses`.
    pub fn primal_objective(&self, xs: &[Vec<f64>], ys: &[f64]) -> Result<f64> {
        primal_objective(&self.w, self.b, self.epsilon, self.c_penalty, xs, ys)
    }
}

pub fn primal_objective(
    w: &[f64],
    b: f64,
    epsilon: f64,
    c: f64,
    xs: &[Vec<f64>],
    ys: &[f64],
) -> Result<f64> {
    let mut loss = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        if x.len() != w.len() {
            return Err(Error::shape("svr feature length mismatch"));
        }
        loss += ((y - dot(w, x) - b).abs() - epsilon).max(0.0);
    }
    Ok(0.5 * dot(w, w) + c * loss)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Lazily computed rows of the linear kernel matrix with a memory budget.
struct KernelRows<'a> {
    xs: &'a [Vec<f64>],
    rows: Vec<Option<Vec<f64>>>,
    cached: usize,
    capacity: usize,
}

impl<'a> KernelRows<'a> {
    fn new(xs: &'a [Vec<f64>]) -> Self {
        let n = xs.len();
        // about 256 MiB of f64 rows
        let capacity = ((32usize << 20) / n.max(1)).max(2);
        KernelRows {
            xs,
            rows: vec![None; n],
            cached: 0,
            capacity,
        }
    }

    fn diag(&self, i: usize) -> f64 {
        dot(&self.xs[i], &self.xs[i])
    }

    fn ensure(&mut self, i: usize) {
        if self.rows[i].is_some() {
            return;
        }
        if self.cached >= self.capacity {
            self.rows.iter_mut().for_each(|r| *r = None);
            self.cached = 0;
        }
        let xi = &self.xs[i];
        self.rows[i] = Some(self.xs.iter().map(|xj| dot(xi, xj)).collect());
        self.cached += 1;
    }

    fn row(&self, i: usize) -> &[f64] {
        self.rows[i]
            .as_deref()
            .expect("kernel row requested before ensure")
    }
}

/// Fits a linear SVR on rows `xs` with targets `ys`.
pub fn svr_fit(xs: &[Vec<f64>], ys: &[f64], config: &SvrConfig) -> Result<(SvrModel, SvrFitInfo)> {
    config.validate()?;
    if xs.is_empty() {
        return Err(Error::Sizing("svr needs at least one training row".into()));
    }
    if xs.len() != ys.len() {
        return Err(Error::shape(format!(
            "svr has {} rows but {} targets",
            xs.len(),
            ys.len()
        )));
    }
    let dim = xs[0].len();
    if let Some(bad) = xs.iter().position(|x| x.len() != dim) {
        return Err(Error::shape(format!(
            "ragged svr input: row {bad} has {} features, row 0 has {dim}",
            xs[bad].len()
        )));
    }

    let l = xs.len();
    let n = 2 * l;
    let c = config.c_penalty;
    let eps = config.epsilon;
    // variable t < l pushes the fit up (y_t = +1), t >= l pushes it down
    let sign = |t: usize| if t < l { 1.0 } else { -1.0 };
    let p: Vec<f64> = (0..n)
        .map(|t| if t < l { eps - ys[t] } else { eps + ys[t - l] })
        .collect();
    let mut kernel = KernelRows::new(xs);
    let qd: Vec<f64> = (0..n).map(|t| kernel.diag(t % l)).collect();
    let mut alpha = vec![0.0; n];
    let mut grad = p.clone();

    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        0.5 * alpha
            .iter()
            .zip(grad.iter().zip(&p))
            .map(|(a, (g, pp))| a * (g + pp))
            .sum::<f64>()
    };

    let mut trace = vec![objective(&alpha, &grad)];
    let mut iterations = 0;
    let mut converged = false;
    while iterations < config.max_iters {
        // first index: maximal violation
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = None;
        for t in 0..n {
            let v = if t < l {
                (alpha[t] < c).then(|| -grad[t])
            } else {
                (alpha[t] > 0.0).then(|| grad[t])
            };
            if let Some(v) = v {
                if v >= gmax {
                    gmax = v;
                    i_sel = Some(t);
                }
            }
        }
        let Some(i) = i_sel else {
            converged = true;
            break;
        };
        kernel.ensure(i % l);
        let yi = sign(i);

        // second index: largest guaranteed decrease
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = None;
        let mut best = f64::INFINITY;
        {
            let ki = kernel.row(i % l);
            for t in 0..n {
                let qit = yi * sign(t) * ki[t % l];
                let (eligible, v, gdiff, quad) = if t < l {
                    (
                        alpha[t] > 0.0,
                        grad[t],
                        gmax + grad[t],
                        qd[i] + qd[t] - 2.0 * yi * qit,
                    )
                } else {
                    (
                        alpha[t] < c,
                        -grad[t],
                        gmax - grad[t],
                        qd[i] + qd[t] + 2.0 * yi * qit,
                    )
                };
                if !eligible {
                    continue;
                }
                gmax2 = gmax2.max(v);
                if gdiff > 0.0 {
                    let obj = -(gdiff * gdiff) / if quad > 0.0 { quad } else { TAU };
                    if obj <= best {
                        best = obj;
                        j_sel = Some(t);
                    }
                }
            }
        }
        if gmax + gmax2 < config.tolerance {
            converged = true;
            break;
        }
        let Some(j) = j_sel else {
            converged = true;
            break;
        };
        kernel.ensure(j % l);
        let yj = sign(j);
        let qij = yi * yj * kernel.row(i % l)[j % l];

        let (old_i, old_j) = (alpha[i], alpha[j]);
        if yi != yj {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let (ki, kj) = (kernel.row(i % l), kernel.row(j % l));
        for t in 0..n {
            let st = sign(t);
            grad[t] += st * (yi * ki[t % l] * di + yj * kj[t % l] * dj);
        }
        iterations += 1;
        if iterations % 16 == 0 {
            trace.push(objective(&alpha, &grad));
        }
    }
    if !converged {
        log::warn!("svr stopped after {iterations} iterations without reaching tolerance");
    }
    trace.push(objective(&alpha, &grad));

    // bias from free variables, else the midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut n_free, mut sum_free) = (0usize, 0.0);
    for t in 0..n {
        let yg = sign(t) * grad[t];
        let at_upper = alpha[t] >= c;
        let at_lower = alpha[t] <= 0.0;
        if at_upper {
            if t >= l {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if at_lower {
            if t < l {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            n_free += 1;
            sum_free += yg;
        }
    }
    let rho = if n_free > 0 {
        sum_free / n_free as f64
    } else {
        (ub + lb) / 2.0
    };

    let mut w = vec![0.0; dim];
    for (k, x) in xs.iter().enumerate() {
        let coef = alpha[k] - alpha[k + l];
        if coef != 0.0 {
            for (wd, xd) in w.iter_mut().zip(x) {
                *wd += coef * xd;
            }
        }
    }
    let model = SvrModel {
        w,
        b: -rho,
        epsilon: eps,
        c_penalty: c,
    };
    Ok((
        model,
        SvrFitInfo {
            iterations,
            converged,
            dual_objective: trace,
        },
    ))
}
