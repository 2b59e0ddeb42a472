//! Fitting models and persisting them.

mod artifact;
mod optim;
mod schedule;
mod trainer;

pub use artifact::{load_artifact, save_artifact, HistorySummary, ModelArtifact, FORMAT_VERSION};
pub use optim::{Optimizer, OptimizerKind};
pub use schedule::{plateau_schedule, PlateauEvent, PlateauScheduler, PLATEAU_EPSILON};
pub use trainer::{
    design_matrix, evaluate_mse, fit_model, train_network, EpochRecord, EpochView, StopReason,
    TrainOutcome, TrainingConfig, TrainingHistory,
};

pub use crate::metrics::{mae, mse};

use std::io::Write;

use crate::error::{Error, Result};

/// `epoch,train_mse,val_mse,lr,seconds`, one row per epoch.
pub fn write_history_csv<W: Write>(writer: W, history: &TrainingHistory) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let err = |e: csv::Error| Error::Parse {
        what: "history csv".into(),
        message: e.to_string(),
    };
    w.write_record(["epoch", "train_mse", "val_mse", "lr", "seconds"])
        .map_err(err)?;
    for e in &history.epochs {
        w.write_record([
            e.epoch.to_string(),
            format!("{:e}", e.train_mse),
            format!("{:e}", e.val_mse),
            format!("{:e}", e.lr),
            format!("{:.6}", e.seconds),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse {
        what: "history csv".into(),
        message: e.to_string(),
    })
}

/// Whitespace-separated `epoch train_mse val_mse` lines for plotting tools.
pub fn write_loss_curve<W: Write>(mut writer: W, history: &TrainingHistory) -> std::io::Result<()> {
    writeln!(writer, "# epoch train_mse val_mse")?;
    for e in &history.epochs {
        writeln!(writer, "{} {:e} {:e}", e.epoch, e.train_mse, e.val_mse)?;
    }
    Ok(())
}
