use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use chrono::NaiveDateTime;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::features::{encode_record, FeatureScalers, FEATURE_DIM};
use super::record::{one_hour, MarketRecord};
use crate::error::{Error, Result};

pub const MAX_WINDOW: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Horizon {
    HourAhead,
    DayAhead,
}

impl Horizon {
    /// Hours between the last input row and the target.
    pub fn offset(self) -> usize {
        match self {
            Horizon::HourAhead => 1,
            Horizon::DayAhead => 24,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Horizon::HourAhead => "hour_ahead",
            Horizon::DayAhead => "day_ahead",
        }
    }
}

impl fmt::Display for Horizon {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Horizon {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").to_ascii_lowercase().as_str() {
            "hour_ahead" | "hour" => Ok(Horizon::HourAhead),
            "day_ahead" | "day" => Ok(Horizon::DayAhead),
            other => Err(Error::config(format!(
                "unknown horizon `{other}` (expected hour_ahead or day_ahead)"
            ))),
        }
    }
}

/// Window length and forecast horizon, fixed per trained model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowSpec {
    pub window_n: usize,
    pub horizon: Horizon,
}

impl WindowSpec {
    pub fn new(window_n: usize, horizon: Horizon) -> Result<Self> {
        if !(1..=MAX_WINDOW).contains(&window_n) {
            return Err(Error::config(format!(
                "window length must be in 1..={MAX_WINDOW}, got {window_n}"
            )));
        }
        Ok(WindowSpec { window_n, horizon })
    }

    /// Records needed before the first target becomes admissible.
    pub fn min_records(&self) -> usize {
        self.window_n + self.horizon.offset()
    }
}

/// `window_n` consecutive encoded hours (oldest first) and the scaled price
/// of the interval `horizon.offset()` hours after the last of them.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowedSample {
    /// Row-major `[window_n x FEATURE_DIM]`.
    pub inputs: Vec<f64>,
    pub window_n: usize,
    pub target: f64,
    pub target_timestamp: NaiveDateTime,
    /// Position of the target in the record slice the sample came from.
    pub target_index: usize,
}

impl WindowedSample {
    pub fn row(&self, i: usize) -> &[f64] {
        &self.inputs[i * FEATURE_DIM..(i + 1) * FEATURE_DIM]
    }

    pub fn last_row(&self) -> &[f64] {
        self.row(self.window_n - 1)
    }
}

/// Indices of records that can serve as targets: the window and the
/// target itself form an unbroken hourly run.
pub fn admissible_targets(records: &[MarketRecord], spec: WindowSpec) -> Result<Vec<usize>> {
    let need = spec.min_records();
    if records.len() < need {
        return Err(Error::Sizing(format!(
            "{} records are too few for window {} with {} offset; at least {need} required",
            records.len(),
            spec.window_n,
            spec.horizon
        )));
    }
    // run[i] = length of the unbroken hourly run ending at i
    let mut run = vec![1usize; records.len()];
    for i in 1..records.len() {
        let step = records[i].timestamp - records[i - 1].timestamp;
        if step <= chrono::TimeDelta::zero() {
            return Err(Error::config(format!(
                "records must be strictly increasing in time (index {i})"
            )));
        }
        if step == one_hour() {
            run[i] = run[i - 1] + 1;
        }
    }
    Ok((need - 1..records.len())
        .filter(|&t| run[t] >= need)
        .collect())
}

fn window_rows(target: usize, spec: WindowSpec) -> std::ops::RangeInclusive<usize> {
    let end = target - spec.horizon.offset();
    end + 1 - spec.window_n..=end
}

fn make_samples(
    records: &[MarketRecord],
    encoded: &[Vec<f64>],
    targets: &[usize],
    spec: WindowSpec,
    scalers: &FeatureScalers,
) -> Result<Vec<WindowedSample>> {
    targets
        .iter()
        .map(|&t| {
            let mut inputs = Vec::with_capacity(spec.window_n * FEATURE_DIM);
            for r in window_rows(t, spec) {
                inputs.extend_from_slice(&encoded[r]);
            }
            Ok(WindowedSample {
                inputs,
                window_n: spec.window_n,
                target: scalers.scale_price(records[t].price)?,
                target_timestamp: records[t].timestamp,
                target_index: t,
            })
        })
        .collect()
}

/// One sample per admissible target. With no gaps the count is
/// `records - window_n - offset + 1`.
pub fn build_windows(
    records: &[MarketRecord],
    scalers: &FeatureScalers,
    window_n: usize,
    horizon: Horizon,
) -> Result<Vec<WindowedSample>> {
    let spec = WindowSpec::new(window_n, horizon)?;
    let targets = admissible_targets(records, spec)?;
    let encoded = records
        .iter()
        .map(|r| encode_record(r, scalers))
        .collect::<Result<Vec<_>>>()?;
    make_samples(records, &encoded, &targets, spec, scalers)
}

/// Partition sizes `round(f * n)` and `n - round(f * n)`.
pub fn split_sizes(n: usize, train_fraction: f64) -> Result<(usize, usize)> {
    if !(train_fraction > 0.0 && train_fraction <= 1.0) {
        return Err(Error::config(format!(
            "train fraction must be in (0, 1], got {train_fraction}"
        )));
    }
    let n_train = (train_fraction * n as f64).round() as usize;
    Ok((n_train, n - n_train))
}

/// Splits `0..n` into train and validation positions. Chronological
/// (oldest first) unless a shuffle seed is given.
pub fn split_indices(
    n: usize,
    train_fraction: f64,
    shuffle_seed: Option<u64>,
) -> Result<(Vec<usize>, Vec<usize>)> {
    if n == 0 {
        return Err(Error::Sizing("cannot split an empty dataset".into()));
    }
    if n < 10 {
        return Err(Error::Sizing(format!(
            "need at least 10 samples to split, got {n}"
        )));
    }
    let (n_train, _) = split_sizes(n, train_fraction)?;
    let mut idx: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    }
    let val = idx.split_off(n_train);
    Ok((idx, val))
}

pub fn split_dataset<T: Clone>(
    samples: &[T],
    train_fraction: f64,
    shuffle_seed: Option<u64>,
) -> Result<(Vec<T>, Vec<T>)> {
    let (tr, va) = split_indices(samples.len(), train_fraction, shuffle_seed)?;
    let pick = |ix: &[usize]| ix.iter().map(|&i| samples[i].clone()).collect();
    Ok((pick(&tr), pick(&va)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitConfig {
    pub train_fraction: f64,
    /// `None` keeps the split chronological.
    pub shuffle_seed: Option<u64>,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.9,
            shuffle_seed: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct PreparedData {
    pub spec: WindowSpec,
    pub scalers: FeatureScalers,
    pub train: Vec<WindowedSample>,
    pub validation: Vec<WindowedSample>,
    /// Raw prices of the records the scalers were fitted on.
    pub train_prices: Vec<f64>,
}

/// Windows `records`, splits the samples, and fits scalers only on the
/// records referenced by training samples (their windows and targets).
pub fn prepare_dataset(
    records: &[MarketRecord],
    spec: WindowSpec,
    split: SplitConfig,
) -> Result<PreparedData> {
    let targets = admissible_targets(records, spec)?;
    let (tr, va) = split_indices(targets.len(), split.train_fraction, split.shuffle_seed)?;
    let train_targets: Vec<usize> = tr.iter().map(|&i| targets[i]).collect();
    let val_targets: Vec<usize> = va.iter().map(|&i| targets[i]).collect();

    let mut used = BTreeSet::new();
    for &t in &train_targets {
        used.extend(window_rows(t, spec));
        used.insert(t);
    }
    let fit_records: Vec<MarketRecord> = used.iter().map(|&i| records[i]).collect();
    let scalers = FeatureScalers::fit(&fit_records)?;

    let encoded = records
        .iter()
        .map(|r| encode_record(r, &scalers))
        .collect::<Result<Vec<_>>>()?;
    Ok(PreparedData {
        spec,
        scalers,
        train: make_samples(records, &encoded, &train_targets, spec, &scalers)?,
        validation: make_samples(records, &encoded, &val_targets, spec, &scalers)?,
        train_prices: fit_records.iter().map(|r| r.price).collect(),
    })
}

#[cfg(test)]
mod tests {
    use chrono::TimeDelta;
    use proptest::prelude::*;

    use super::*;
    use crate::data::features::PRICE_FEATURE;
    use crate::data::record::parse_timestamp;

    fn hourly(n: usize) -> Vec<MarketRecord> {
        let start = parse_timestamp("2021-06-01T00:00").unwrap();
        (0..n)
            .map(|i| MarketRecord {
                timestamp: start + TimeDelta::hours(i as i64),
                price: 20.0 + (i % 7) as f64,
                load: 1000.0 + i as f64,
                temperature: 15.0 + (i % 5) as f64,
            })
            .collect()
    }

    fn scalers(recs: &[MarketRecord]) -> FeatureScalers {
        FeatureScalers::fit(recs).unwrap()
    }

    #[test]
    fn thirty_records_window_24() {
        let recs = hourly(30);
        let s = build_windows(&recs, &scalers(&recs), 24, Horizon::HourAhead).unwrap();
        assert_eq!(s.len(), 6);
        let idx: Vec<usize> = s.iter().map(|w| w.target_index).collect();
        assert_eq!(idx, (24..30).collect::<Vec<_>>());
        // last input row is the hour before the target
        let w = &s[0];
        assert_eq!(
            w.last_row()[PRICE_FEATURE],
            scalers(&recs).scale_price(recs[23].price).unwrap()
        );
    }

    #[test]
    fn boundary_and_insufficient() {
        let recs = hourly(25);
        assert_eq!(
            build_windows(&recs, &scalers(&recs), 24, Horizon::HourAhead)
                .unwrap()
                .len(),
            1
        );
        let recs = hourly(24);
        let err = build_windows(&recs, &scalers(&recs), 24, Horizon::HourAhead).unwrap_err();
        assert!(
            matches!(err, Error::Sizing(ref m) if m.contains("at least 25")),
            "{err}"
        );
    }

    #[test]
    fn window_length_bounds() {
        let recs = hourly(60);
        assert!(build_windows(&recs, &scalers(&recs), 0, Horizon::HourAhead).is_err());
        assert!(build_windows(&recs, &scalers(&recs), 25, Horizon::HourAhead).is_err());
    }

    #[test]
    fn day_ahead_inputs_end_a_day_early() {
        let recs = hourly(60);
        let sc = scalers(&recs);
        let s = build_windows(&recs, &sc, 3, Horizon::DayAhead).unwrap();
        assert_eq!(s.len(), 60 - 3 - 24 + 1);
        for w in &s {
            let last = w.target_index - 24;
            assert_eq!(
                w.last_row()[PRICE_FEATURE],
                sc.scale_price(recs[last].price).unwrap()
            );
        }
    }

    #[test]
    fn reference_split_sizes() {
        assert_eq!(split_sizes(34_637, 0.9).unwrap(), (31_173, 3_464));
        let (a, b) = split_indices(10, 0.9, None).unwrap();
        assert_eq!((a.len(), b.len()), (9, 1));
        assert_eq!(b, vec![9]);
    }

    #[test]
    fn split_errors() {
        assert!(matches!(split_indices(0, 0.9, None), Err(Error::Sizing(_))));
        assert!(split_indices(9, 0.9, None).is_err());
        assert!(split_indices(100, 0.0, None).is_err());
    }

    #[test]
    fn shuffled_split_is_seeded() {
        let a = split_indices(200, 0.9, Some(4)).unwrap();
        let b = split_indices(200, 0.9, Some(4)).unwrap();
        let c = split_indices(200, 0.9, Some(5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn scalers_see_only_training_records() {
        let mut recs = hourly(200);
        // make the validation tail contain extreme prices
        for r in recs.iter_mut().skip(190) {
            r.price = 10_000.0;
        }
        let spec = WindowSpec::new(4, Horizon::HourAhead).unwrap();
        let data = prepare_dataset(&recs, spec, SplitConfig::default()).unwrap();
        let n = 200 - 4 - 1 + 1;
        let n_train = (0.9 * n as f64).round() as usize;
        assert_eq!(data.train.len(), n_train);
        // training targets are indices 4 ..= 4 + n_train - 1
        let last_train = 4 + n_train - 1;
        assert_eq!(data.scalers.fitted_on, last_train + 1);
        assert_eq!(data.train_prices.len(), last_train + 1);
        assert!(data.scalers.price.max().unwrap() < 10_000.0);
    }

    fn with_gaps(n: usize, gaps: &[usize]) -> Vec<MarketRecord> {
        let mut recs = hourly(n);
        let mut shift = 0;
        for (i, r) in recs.iter_mut().enumerate() {
            if gaps.contains(&i) {
                shift += 3;
            }
            r.timestamp += TimeDelta::hours(shift);
        }
        recs
    }

    proptest! {
        #[test]
        fn windows_are_consecutive_hours(
            n in 30usize..120,
            window in 1usize..=24,
            day in any::<bool>(),
            gaps in proptest::collection::vec(1usize..120, 0..4),
        ) {
            let horizon = if day { Horizon::DayAhead } else { Horizon::HourAhead };
            let recs = with_gaps(n, &gaps);
            prop_assume!(n >= window + horizon.offset());
            let sc = scalers(&recs);
            let samples = build_windows(&recs, &sc, window, horizon).unwrap();
            for s in &samples {
                let t = s.target_index;
                let first = t + 1 - horizon.offset() - window;
                for i in first..t {
                    prop_assert_eq!(recs[i + 1].timestamp - recs[i].timestamp, one_hour());
                }
            }
            // brute-force count of admissible targets
            let expected = (0..n).filter(|&t| {
                t + 1 >= window + horizon.offset()
                    && (t + 1 - window - horizon.offset()..t)
                        .all(|i| recs[i + 1].timestamp - recs[i].timestamp == one_hour())
            }).count();
            prop_assert_eq!(samples.len(), expected);
            if gaps.iter().all(|&g| g >= n) {
                prop_assert_eq!(samples.len(), n - window - horizon.offset() + 1);
            }
        }

        #[test]
        fn shifting_time_shifts_targets_only(k in 1i64..5000, window in 1usize..=24) {
            let recs = hourly(80);
            let shifted: Vec<MarketRecord> = recs.iter().map(|r| MarketRecord {
                timestamp: r.timestamp + TimeDelta::hours(k),
                ..*r
            }).collect();
            let sc = scalers(&recs);
            let a = build_windows(&recs, &sc, window, Horizon::HourAhead).unwrap();
            let b = build_windows(&shifted, &sc, window, Horizon::HourAhead).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (x, y) in a.iter().zip(&b) {
                prop_assert_eq!(y.target_timestamp - x.target_timestamp, TimeDelta::hours(k));
                prop_assert_eq!(x.target, y.target);
                prop_assert_eq!(x.target_index, y.target_index);
                for r in 0..window {
                    prop_assert_eq!(&x.row(r)[crate::data::features::TEMPERATURE_FEATURE..],
                                    &y.row(r)[crate::data::features::TEMPERATURE_FEATURE..]);
                }
            }
        }
    }
}
