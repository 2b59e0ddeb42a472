use serde::{Deserialize, Serialize};

/// Minimum decrease in validation MSE that counts as an improvement.
pub const PLATEAU_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PlateauEvent {
    Unchanged,
    Reduced {
        from: f64,
        to: f64,
    },
    /// A reduction was due but the rate already sits at its floor.
    Exhausted,
}

/// Reduce-on-plateau learning-rate schedule.
///
/// After `patience` consecutive epochs without an improvement of more than
/// [`PLATEAU_EPSILON`] over the best validation loss, the rate is multiplied
/// by `factor` (floored at `min_lr`) and the counter restarts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
    best: f64,
    wait: usize,
    reductions: usize,
}

impl PlateauScheduler {
    pub fn new(initial_lr: f64, factor: f64, patience: usize, min_lr: f64) -> Self {
        PlateauScheduler {
            lr: initial_lr.max(min_lr),
            factor,
            patience,
            min_lr,
            best: f64::INFINITY,
            wait: 0,
            reductions: 0,
        }
    }

    pub fn lr(&self) -> f64 {
        self.lr
    }

    pub fn reductions(&self) -> usize {
        self.reductions
    }

    pub fn observe(&mut self, val_loss: f64) -> PlateauEvent {
        if val_loss < self.best - PLATEAU_EPSILON {
            self.best = val_loss;
            self.wait = 0;
            return PlateauEvent::Unchanged;
        }
        self.wait += 1;
        if self.wait < self.patience {
            return PlateauEvent::Unchanged;
        }
        self.wait = 0;
        if self.lr <= self.min_lr {
            return PlateauEvent::Exhausted;
        }
        let from = self.lr;
        let next = self.lr * self.factor;
        // Snap to the floor when rounding leaves the product a hair above it.
        self.lr = if next <= self.min_lr * (1.0 + 1e-9) {
            self.min_lr
        } else {
            next
        };
        self.reductions += 1;
        PlateauEvent::Reduced { from, to: self.lr }
    }
}

/// Learning rate in effect after each epoch of a validation-loss trace.
pub fn plateau_schedule(
    val_losses: &[f64],
    initial_lr: f64,
    factor: f64,
    patience: usize,
    min_lr: f64,
) -> Vec<f64> {
    let mut s = PlateauScheduler::new(initial_lr, factor, patience, min_lr);
    val_losses
        .iter()
        .map(|&v| {
            s.observe(v);
            s.lr()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_trace_reduces_once_at_epoch_51() {
        let lrs = plateau_schedule(&[0.5; 51], 0.01, 0.1, 50, 1e-6);
        assert!(lrs[..50].iter().all(|&lr| lr == 0.01));
        assert!((lrs[50] - 0.001).abs() < 1e-18);
    }

    #[test]
    fn improving_trace_never_reduces() {
        let trace: Vec<f64> = (0..300).map(|e| 1.0 / (e + 1) as f64).collect();
        let lrs = plateau_schedule(&trace, 0.01, 0.1, 50, 1e-6);
        assert!(lrs.iter().all(|&lr| lr == 0.01));
    }

    #[test]
    fn two_plateaus_reduce_twice() {
        let lrs = plateau_schedule(&[0.5; 101], 0.01, 0.1, 50, 1e-6);
        assert!((lrs[50] - 1e-3).abs() < 1e-15);
        assert!((lrs[99] - 1e-3).abs() < 1e-15);
        assert!((lrs[100] - 1e-4).abs() < 1e-15);
    }

    #[test]
    fn tiny_improvements_do_not_count() {
        let trace: Vec<f64> = (0..51).map(|e| 1.0 - e as f64 * 1e-10).collect();
        let lrs = plateau_schedule(&trace, 0.01, 0.1, 50, 1e-6);
        assert!((lrs[50] - 0.001).abs() < 1e-15);
    }

    #[test]
    fn floor_then_exhausted() {
        let mut s = PlateauScheduler::new(1e-5, 0.1, 1, 1e-6);
        assert_eq!(s.observe(1.0), PlateauEvent::Unchanged);
        assert!(matches!(s.observe(1.0), PlateauEvent::Reduced { .. }));
        assert_eq!(s.lr(), 1e-6);
        assert_eq!(s.observe(1.0), PlateauEvent::Exhausted);
        assert_eq!(s.lr(), 1e-6);
    }
}
