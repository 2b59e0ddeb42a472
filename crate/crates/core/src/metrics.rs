//! Threshold accuracy, MAE and MSE, and report output.

use std::fmt::Write as _;
use std::io::Write;

use chrono::NaiveDateTime;
use serde::{Deserialize, Serialize};

use crate::data::{FeatureScalers, Horizon, MinMaxScaler, WindowedSample};
use crate::error::{Error, Result};
use crate::models::Forecaster;

pub const DEFAULT_THRESHOLDS: [f64; 3] = [1.0, 2.0, 3.0];

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    if a.is_empty() {
        return Err(Error::Sizing("metric over an empty set".into()));
    }
    if a.len() != b.len() {
        return Err(Error::shape(format!(
            "metric inputs differ in length: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Mean squared error.
pub fn mse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok(sum / actual.len() as f64)
}

/// Mean absolute error.
pub fn mae(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    check_pair(actual, predicted)?;
    let sum: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p).abs())
        .sum();
    Ok(sum / actual.len() as f64)
}

/// Percentage of forecasts within `threshold` of the actual price. An error
/// exactly equal to the threshold counts as correct.
pub fn threshold_accuracy(predicted: &[f64], actual: &[f64], threshold: f64) -> Result<f64> {
    check_pair(predicted, actual)?;
    if threshold.is_nan() || threshold <= 0.0 {
        return Err(Error::config(format!(
            "accuracy threshold must be positive, got {threshold}"
        )));
    }
    let hits = predicted
        .iter()
        .zip(actual)
        .filter(|(p, a)| (*p - *a).abs() <= threshold)
        .count();
    Ok(100.0 * hits as f64 / predicted.len() as f64)
}

pub fn validate_thresholds(thresholds: &[f64]) -> Result<()> {
    if thresholds.is_empty() {
        return Err(Error::config("at least one accuracy threshold is required"));
    }
    if let Some(t) = thresholds.iter().find(|t| !(**t > 0.0)) {
        return Err(Error::config(format!(
            "accuracy thresholds must be positive, got {t}"
        )));
    }
    Ok(())
}

/// Raw-currency forecasts aligned with actuals.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ForecastSeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub actual: Vec<f64>,
    pub predicted: Vec<f64>,
}

impl ForecastSeries {
    pub fn len(&self) -> usize {
        self.actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actual.is_empty()
    }
}

/// Runs `model` over `samples` and inverse-scales both forecast and target.
pub fn forecast_series(
    model: &dyn Forecaster,
    samples: &[WindowedSample],
    scalers: &FeatureScalers,
) -> Result<ForecastSeries> {
    let mut out = ForecastSeries::default();
    for s in samples {
        out.timestamps.push(s.target_timestamp);
        out.actual.push(scalers.inverse_price(s.target)?);
        out.predicted
            .push(scalers.inverse_price(model.forecast(s)?)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub horizon: Horizon,
    pub thresholds: Vec<f64>,
    /// Percentages, one per threshold.
    pub accuracy: Vec<f64>,
    /// On min-max scaled prices.
    pub mae: f64,
    /// On min-max scaled prices.
    pub mse: f64,
    pub train_seconds: Option<f64>,
    pub samples: usize,
}

impl MetricsReport {
    /// Accuracy from raw prices; MAE and MSE after scaling with `price`.
    pub fn compute(
        model: impl Into<String>,
        horizon: Horizon,
        series: &ForecastSeries,
        price: &MinMaxScaler,
        thresholds: &[f64],
    ) -> Result<Self> {
        validate_thresholds(thresholds)?;
        let accuracy = thresholds
            .iter()
            .map(|&t| threshold_accuracy(&series.predicted, &series.actual, t))
            .collect::<Result<Vec<_>>>()?;
        let scale = |v: &[f64]| {
            v.iter()
                .map(|&x| price.transform(x))
                .collect::<Result<Vec<_>>>()
        };
        let actual = scale(&series.actual)?;
        let predicted = scale(&series.predicted)?;
        Ok(MetricsReport {
            model: model.into(),
            horizon,
            thresholds: thresholds.to_vec(),
            accuracy,
            mae: mae(&actual, &predicted)?,
            mse: mse(&actual, &predicted)?,
            train_seconds: None,
            samples: series.len(),
        })
    }

    pub fn accuracy_at(&self, threshold: f64) -> Option<f64> {
        self.thresholds
            .iter()
            .position(|&t| t == threshold)
            .map(|i| self.accuracy[i])
    }
}

fn fmt_threshold(t: f64) -> String {
    if t.fract() == 0.0 {
        format!("{t:.0}")
    } else {
        format!("{t}")
    }
}

/// One row per model x horizon x threshold. Training time is left out so
/// that reruns with the same seed produce identical files.
pub fn write_report_csv<W: Write>(writer: W, reports: &[MetricsReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| Error::Parse {
        what: "report csv".into(),
        message: e.to_string(),
    };
    w.write_record([
        "model",
        "horizon",
        "threshold",
        "accuracy_pct",
        "mae",
        "mse",
        "samples",
    ])
    .map_err(csv_err)?;
    for r in reports {
        for (t, a) in r.thresholds.iter().zip(&r.accuracy) {
            w.write_record([
                r.model.clone(),
                r.horizon.to_string(),
                fmt_threshold(*t),
                format!("{a:.2}"),
                format!("{:.6}", r.mae),
                format!("{:.6}", r.mse),
                r.samples.to_string(),
            ])
            .map_err(csv_err)?;
        }
    }
    w.flush().map_err(|e| Error::Parse {
        what: "report csv".into(),
        message: e.to_string(),
    })?;
    Ok(())
}

/// Aligned text table, one block per horizon.
pub fn format_table(reports: &[MetricsReport]) -> String {
    let mut out = String::new();
    let mut horizons: Vec<Horizon> = Vec::new();
    for r in reports {
        if !horizons.contains(&r.horizon) {
            horizons.push(r.horizon);
        }
    }
    for h in horizons {
        let rows: Vec<&MetricsReport> = reports.iter().filter(|r| r.horizon == h).collect();
        let thresholds = rows[0].thresholds.clone();
        let with_time = rows.iter().any(|r| r.train_seconds.is_some());

        let mut header = vec!["model".to_string()];
        header.extend(
            thresholds
                .iter()
                .map(|t| format!("acc@${}", fmt_threshold(*t))),
        );
        header.extend(["mae".into(), "mse".into(), "samples".into()]);
        if with_time {
            header.push("train_s".into());
        }
        let mut table = vec![header];
        for r in rows {
            let mut row = vec![r.model.clone()];
            for t in &thresholds {
                row.push(r.accuracy_at(*t).map_or("-".into(), |a| format!("{a:.2}")));
            }
            row.push(format!("{:.4}", r.mae));
            row.push(format!("{:.4}", r.mse));
            row.push(r.samples.to_string());
            if with_time {
                row.push(r.train_seconds.map_or("-".into(), |s| format!("{s:.2}")));
            }
            table.push(row);
        }
        let widths: Vec<usize> = (0..table[0].len())
            .map(|c| table.iter().map(|row| row[c].len()).max().unwrap_or(0))
            .collect();
        let _ = writeln!(out, "{h}");
        for (i, row) in table.iter().enumerate() {
            let cells: Vec<String> = row
                .iter()
                .enumerate()
                .map(|(c, cell)| {
                    if c == 0 {
                        format!("{cell:<w$}", w = widths[c])
                    } else {
                        format!("{cell:>w$}", w = widths[c])
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if i == 0 {
                let total = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
                let _ = writeln!(out, "{}", "-".repeat(total));
            }
        }
        out.push('\n');
    }
    out
}
