use super::tensor::Tensor;

/// Logistic sigmoid, evaluated so that `exp` never receives a large
/// positive argument.
#[inline]
pub fn sigmoid_scalar(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[inline]
pub fn tanh_scalar(x: f64) -> f64 {
    // std's tanh saturates cleanly to +-1 without overflow.
    x.tanh()
}

#[inline]
pub fn relu_scalar(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        0.0
    }
}

pub fn relu(x: &Tensor) -> Tensor {
    x.map(relu_scalar)
}

pub fn sigmoid(x: &Tensor) -> Tensor {
    x.map(sigmoid_scalar)
}

pub fn tanh(x: &Tensor) -> Tensor {
    x.map(tanh_scalar)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_branches() {
        assert_eq!(relu_scalar(-2.0), 0.0);
        assert_eq!(relu_scalar(3.0), 3.0);
        assert_eq!(relu_scalar(0.0), 0.0);
        let t = Tensor::from_vec(vec![-2.0, 0.0, 3.0]).unwrap();
        assert_eq!(relu(&t).values(), &[0.0, 0.0, 3.0]);
    }

    #[test]
    fn sigmoid_reference_values() {
        assert_eq!(sigmoid_scalar(0.0), 0.5);
        let x = 1.7;
        assert!((sigmoid_scalar(x) - (1.0 - sigmoid_scalar(-x))).abs() < 1e-15);
        // 1 / (1 + e^-2)
        assert!((sigmoid_scalar(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
    }

    #[test]
    fn sigmoid_extreme_inputs_stay_finite() {
        for x in [-1e4, -745.0, -50.0, 50.0, 745.0, 1e4] {
            let s = sigmoid_scalar(x);
            assert!(s.is_finite() && (0.0..=1.0).contains(&s), "{x} -> {s}");
        }
        assert!(tanh_scalar(1e4).is_finite());
    }
}
