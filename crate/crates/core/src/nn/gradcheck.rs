//! Central finite-difference gradient checking.
//!
//! The probe loss is `L = sum_k out[k] * weights[k]` for a fixed weight
//! vector, so `dL/dout = weights` is the upstream gradient fed to
//! `backward`. Numerical derivatives only ever call `forward`.

use super::layer::Layer;
use crate::error::Result;

pub const DEFAULT_STEP: f64 = 1e-5;

/// Relative error with a small absolute floor so that gradients which are
/// zero up to rounding do not blow up the ratio.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let diff = (analytic - numeric).abs();
    diff / analytic.abs().max(numeric.abs()).max(1e-7)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct GradCheckReport {
    pub max_rel_error_params: f64,
    pub max_rel_error_input: f64,
    pub checked: usize,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.max_rel_error_params.max(self.max_rel_error_input)
    }
}

fn probe<L: Layer + ?Sized>(layer: &L, input: &[f64], weights: &[f64]) -> Result<f64> {
    let out = layer.forward(input)?;
    Ok(out.iter().zip(weights).map(|(o, w)| o * w).sum())
}

/// Compares analytic input and parameter gradients of `layer` at `input`
/// against central differences with step `h`.
pub fn check_layer<L: Layer + ?Sized>(
    layer: &mut L,
    input: &[f64],
    loss_weights: &[f64],
    h: f64,
) -> Result<GradCheckReport> {
    for p in layer.params_mut() {
        p.zero_grad();
    }
    layer.forward_train(input)?;
    let grad_in = layer.backward(loss_weights)?;
    let analytic_params: Vec<Vec<f64>> = layer
        .params()
        .iter()
        .map(|p| p.grad().map_or_else(|| vec![0.0; p.len()], <[f64]>::to_vec))
        .collect();

    let mut report = GradCheckReport::default();

    let mut x = input.to_vec();
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let plus = probe(layer, &x, loss_weights)?;
        x[i] = orig - h;
        let minus = probe(layer, &x, loss_weights)?;
        x[i] = orig;
        let numeric = (plus - minus) / (2.0 * h);
        report.max_rel_error_input = report
            .max_rel_error_input
            .max(relative_error(grad_in[i], numeric));
        report.checked += 1;
    }

    let n_params = analytic_params.len();
    for pi in 0..n_params {
        let len = analytic_params[pi].len();
        for j in 0..len {
            let orig = layer.params()[pi].values()[j];
            layer.params_mut()[pi].values_mut()[j] = orig + h;
            let plus = probe(layer, input, loss_weights)?;
            layer.params_mut()[pi].values_mut()[j] = orig - h;
            let minus = probe(layer, input, loss_weights)?;
            layer.params_mut()[pi].values_mut()[j] = orig;
            let numeric = (plus - minus) / (2.0 * h);
            report.max_rel_error_params = report
                .max_rel_error_params
                .max(relative_error(analytic_params[pi][j], numeric));
            report.checked += 1;
        }
    }
    Ok(report)
}
