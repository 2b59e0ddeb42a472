//! Seeded synthetic hourly market data.
//!
//! Temperature follows a yearly and a daily cycle; load follows a daily
//! shape plus the temperature's distance from its mean; price follows a
//! daily and weekly cycle plus load coupling, AR(1) noise and occasional
//! spike episodes.

use std::f64::consts::TAU;
use std::fmt;

use chrono::{Datelike, NaiveDateTime, TimeDelta, Timelike};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::data::{format_timestamp, parse_timestamp, MarketRecord};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthConfig {
    pub hours: usize,
    pub seed: u64,
    #[serde(with = "timestamp_serde")]
    pub start: NaiveDateTime,

    pub base_price: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    /// Stationary standard deviation of the price noise.
    pub noise_std: f64,
    /// AR(1) coefficient of the price noise, in [0, 1).
    pub noise_ar: f64,
    /// Probability that a spike episode starts in a given hour.
    pub spike_rate: f64,
    pub spike_magnitude: (f64, f64),
    /// Hours a spike stays at full magnitude (1 = single-hour impulse).
    pub spike_hold_hours: usize,
    /// Extra hours over which the spike tapers off linearly after the hold.
    pub spike_decay_hours: usize,
    /// Price change per MW of load above `load_base`.
    pub price_load_coupling: f64,

    pub load_base: f64,
    pub load_daily_amplitude: f64,
    /// Load increase per degree of distance from `temp_mean`.
    pub load_temp_coupling: f64,
    pub load_noise_std: f64,

    pub temp_mean: f64,
    pub temp_yearly_amplitude: f64,
    pub temp_daily_amplitude: f64,
    pub temp_noise_std: f64,
}

mod timestamp_serde {
    use chrono::NaiveDateTime;
    use serde::{Deserialize, Deserializer, Serializer};

    use crate::data::{format_timestamp, parse_timestamp};

    pub fn serialize<S: Serializer>(ts: &NaiveDateTime, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_timestamp(*ts))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<NaiveDateTime, D::Error> {
        let text = String::deserialize(d)?;
        parse_timestamp(&text)
            .ok_or_else(|| serde::de::Error::custom(format!("invalid timestamp {text:?}")))
    }
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            hours: 90 * 24,
            seed: 0,
            start: parse_timestamp("2019-01-01T00:00:00").expect("valid literal"),
            base_price: 30.0,
            daily_amplitude: 8.0,
            weekly_amplitude: 3.0,
            noise_std: 2.0,
            noise_ar: 0.9,
            spike_rate: 0.005,
            spike_magnitude: (20.0, 80.0),
            spike_hold_hours: 1,
            spike_decay_hours: 0,
            price_load_coupling: 0.01,
            load_base: 1000.0,
            load_daily_amplitude: 150.0,
            load_temp_coupling: 12.0,
            load_noise_std: 15.0,
            temp_mean: 18.0,
            temp_yearly_amplitude: 10.0,
            temp_daily_amplitude: 4.0,
            temp_noise_std: 0.8,
        }
    }
}

impl SynthConfig {
    /// No cycles, noise or spikes: every price equals `base_price`.
    pub fn flat(hours: usize, base_price: f64) -> Self {
        SynthConfig {
            hours,
            base_price,
            daily_amplitude: 0.0,
            weekly_amplitude: 0.0,
            noise_std: 0.0,
            spike_rate: 0.0,
            load_daily_amplitude: 0.0,
            load_noise_std: 0.0,
            temp_yearly_amplitude: 0.0,
            temp_daily_amplitude: 0.0,
            temp_noise_std: 0.0,
            ..SynthConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hours == 0 {
            return Err(Error::config("hours must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.spike_rate) {
            return Err(Error::config(format!(
                "spike_rate must lie in [0, 1], got {}",
                self.spike_rate
            )));
        }
        if !(0.0..1.0).contains(&self.noise_ar) {
            return Err(Error::config(format!(
                "noise_ar must lie in [0, 1), got {}",
                self.noise_ar
            )));
        }
        let (lo, hi) = self.spike_magnitude;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::config(format!(
                "spike_magnitude must satisfy 0 <= lo <= hi, got ({lo}, {hi})"
            )));
        }
        if self.spike_hold_hours == 0 {
            return Err(Error::config("spike_hold_hours must be at least 1"));
        }
        for (name, v) in [
            ("daily_amplitude", self.daily_amplitude),
            ("weekly_amplitude", self.weekly_amplitude),
            ("noise_std", self.noise_std),
            ("load_daily_amplitude", self.load_daily_amplitude),
            ("load_noise_std", self.load_noise_std),
            ("temp_yearly_amplitude", self.temp_yearly_amplitude),
            ("temp_daily_amplitude", self.temp_daily_amplitude),
            ("temp_noise_std", self.temp_noise_std),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::config(format!(
                    "{name} must be finite and non-negative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("base_price", self.base_price),
            ("price_load_coupling", self.price_load_coupling),
            ("load_base", self.load_base),
            ("load_temp_coupling", self.load_temp_coupling),
            ("temp_mean", self.temp_mean),
        ] {
            if !v.is_finite() {
                return Err(Error::config(format!("{name} must be finite")));
            }
        }
        Ok(())
    }
}

/// Generated records plus the hours at which spike episodes started.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthOutput {
    pub records: Vec<MarketRecord>,
    pub spike_starts: Vec<usize>,
}

fn normal(std: f64) -> Normal<f64> {
    Normal::new(0.0, std).expect("std validated as finite and non-negative")
}

/// Multiplier of the spike magnitude `k` hours after an episode starts.
fn spike_profile(k: usize, hold: usize, decay: usize) -> f64 {
    if k < hold {
        1.0
    } else if k < hold + decay {
        (hold + decay - k) as f64 / (decay + 1) as f64
    } else {
        0.0
    }
}

pub fn generate_detailed(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let price_innovation =
        normal(config.noise_std * (1.0 - config.noise_ar * config.noise_ar).sqrt());
    let load_noise = normal(config.load_noise_std);
    let temp_noise = normal(config.temp_noise_std);

    let mut noise = normal(config.noise_std).sample(&mut rng);
    let mut spike_starts = Vec::new();
    // Active episodes as (start hour, magnitude).
    let mut active: Vec<(usize, f64)> = Vec::new();
    let span = config.spike_hold_hours + config.spike_decay_hours;
    let mut records = Vec::with_capacity(config.hours);

    for i in 0..config.hours {
        let ts = config.start + TimeDelta::hours(i as i64);
        let hour = ts.hour() as f64;
        let day_of_year = ts.ordinal0() as f64 + hour / 24.0;
        let hour_of_week = (ts.weekday().num_days_from_monday() * 24 + ts.hour()) as f64;

        let temperature = config.temp_mean
            - config.temp_yearly_amplitude * (TAU * (day_of_year + 10.0) / 365.25).cos()
            - config.temp_daily_amplitude * (TAU * (hour - 3.0) / 24.0).cos()
            + temp_noise.sample(&mut rng);

        let load = config.load_base
            - config.load_daily_amplitude * (TAU * (hour - 4.0) / 24.0).cos()
            + config.load_temp_coupling * (temperature - config.temp_mean).abs()
            + load_noise.sample(&mut rng);

        if i > 0 {
            noise = config.noise_ar * noise + price_innovation.sample(&mut rng);
        }
        if config.spike_rate > 0.0 && rng.random_bool(config.spike_rate) {
            let (lo, hi) = config.spike_magnitude;
            let m = if hi > lo {
                rng.random_range(lo..=hi)
            } else {
                lo
            };
            spike_starts.push(i);
            active.push((i, m));
        }
        active.retain(|&(s, _)| i - s < span);
        let spike: f64 = active
            .iter()
            .map(|&(s, m)| {
                m * spike_profile(i - s, config.spike_hold_hours, config.spike_decay_hours)
            })
            .sum();

        let price = config.base_price - config.daily_amplitude * (TAU * (hour - 5.0) / 24.0).cos()
            + config.weekly_amplitude * (TAU * hour_of_week / 168.0).cos()
            + config.price_load_coupling * (load - config.load_base)
            + noise
            + spike;

        records.push(MarketRecord {
            timestamp: ts,
            price: price.max(0.0),
            load,
            temperature,
        });
    }
    Ok(SynthOutput {
        records,
        spike_starts,
    })
}

pub fn generate(config: &SynthConfig) -> Result<Vec<MarketRecord>> {
    Ok(generate_detailed(config)?.records)
}

/// Summary statistics of a price series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SeriesSummary {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Values above `mean + 3 std`.
    pub spike_count: usize,
    /// `None` when undefined (constant series or too short).
    pub autocorr_lag1: Option<f64>,
    pub autocorr_lag24: Option<f64>,
}

/// Pearson correlation between `x[..n-lag]` and `x[lag..]`.
pub fn lagged_autocorrelation(x: &[f64], lag: usize) -> Option<f64> {
    if lag == 0 || x.len() < lag + 2 {
        return None;
    }
    let a = &x[..x.len() - lag];
    let b = &x[lag..];
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (u, v) in a.iter().zip(b) {
        sab += (u - ma) * (v - mb);
        saa += (u - ma) * (u - ma);
        sbb += (v - mb) * (v - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        return None;
    }
    Some(sab / (saa * sbb).sqrt())
}

pub fn describe(series: &[f64]) -> Result<SeriesSummary> {
    if series.is_empty() {
        return Err(Error::Sizing("cannot describe an empty series".into()));
    }
    let n = series.len() as f64;
    let mean = series.iter().sum::<f64>() / n;
    let std = (series.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let cut = mean + 3.0 * std;
    let undefined = std == 0.0;
    Ok(SeriesSummary {
        count: series.len(),
        mean,
        std,
        min: series.iter().copied().fold(f64::INFINITY, f64::min),
        max: series.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        spike_count: series.iter().filter(|&&v| v > cut).count(),
        autocorr_lag1: if undefined {
            None
        } else {
            lagged_autocorrelation(series, 1)
        },
        autocorr_lag24: if undefined {
            None
        } else {
            lagged_autocorrelation(series, 24)
        },
    })
}

impl fmt::Display for SeriesSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let ac = |v: Option<f64>| v.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        writeln!(f, "hours:           {}", self.count)?;
        writeln!(f, "price mean:      {:.4}", self.mean)?;
        writeln!(f, "price std:       {:.4}", self.std)?;
        writeln!(f, "price range:     {:.4} .. {:.4}", self.min, self.max)?;
        writeln!(f, "spikes (>3 std): {}", self.spike_count)?;
        writeln!(f, "autocorr lag 1:  {}", ac(self.autocorr_lag1))?;
        write!(f, "autocorr lag 24: {}", ac(self.autocorr_lag24))
    }
}

/// First and last timestamps of a generated series, for logging.
pub fn span_label(records: &[MarketRecord]) -> String {
    match (records.first(), records.last()) {
        (Some(a), Some(b)) => format!(
            "{} .. {}",
            format_timestamp(a.timestamp),
            format_timestamp(b.timestamp)
        ),
        _ => "empty".into(),
    }
}
