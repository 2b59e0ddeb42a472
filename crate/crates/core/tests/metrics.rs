use chrono::TimeDelta;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spotcast_core::correction::{CorrectionConfig, CorrectionStream, PriceQuantiles};
use spotcast_core::data::{
    build_windows, parse_timestamp, prepare_dataset, FeatureScalers, Horizon, MarketRecord,
    MinMaxScaler, SplitConfig, WindowSpec, WindowedSample, PRICE_FEATURE,
};
use spotcast_core::experiment::{corrected_series, evaluate_artifact, train_spec};
use spotcast_core::metrics::{
    forecast_series, mae, mse, threshold_accuracy, ForecastSeries, MetricsReport,
};
use spotcast_core::models::{Forecaster, LrcnConfig, Model, ModelSpec};
use spotcast_core::synth::{generate, SynthConfig};
use spotcast_core::training::TrainingConfig;
use spotcast_core::Result;

/// Forecasts the true scaled target.
struct Oracle;

impl Forecaster for Oracle {
    fn forecast(&self, sample: &WindowedSample) -> Result<f64> {
        Ok(sample.target)
    }
}

fn pairs() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (1usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(-100.0f64..400.0, n),
            prop::collection::vec(-100.0f64..400.0, n),
        )
    })
}

proptest! {
    #[test]
    fn accuracy_is_monotone_in_threshold((p, a) in pairs(), t in 0.0f64..20.0, dt in 0.0f64..20.0) {
        let lo = threshold_accuracy(&p, &a, t).unwrap();
        let hi = threshold_accuracy(&p, &a, t + dt).unwrap();
        prop_assert!(lo <= hi);
        prop_assert!((0.0..=100.0).contains(&lo));
    }

    #[test]
    fn metrics_ignore_order((p, a) in pairs(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        let mut idx: Vec<usize> = (0..p.len()).collect();
        idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let ps: Vec<f64> = idx.iter().map(|&i| p[i]).collect();
        let as_: Vec<f64> = idx.iter().map(|&i| a[i]).collect();
        prop_assert_eq!(threshold_accuracy(&p, &a, 2.0).unwrap(), threshold_accuracy(&ps, &as_, 2.0).unwrap());
        prop_assert!((mae(&a, &p).unwrap() - mae(&as_, &ps).unwrap()).abs() < 1e-9);
        prop_assert!((mse(&a, &p).unwrap() - mse(&as_, &ps).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn mse_dominates_squared_mae((p, a) in pairs()) {
        let m = mae(&a, &p).unwrap();
        prop_assert!(mse(&a, &p).unwrap() + 1e-9 >= m * m);
    }
}

#[test]
fn threshold_is_inclusive() {
    assert_eq!(
        threshold_accuracy(&[11.0, 9.0, 13.5], &[10.0, 10.0, 10.0], 1.0).unwrap(),
        200.0 / 3.0
    );
    assert!(threshold_accuracy(&[1.0], &[1.0, 2.0], 1.0).is_err());
    assert!(threshold_accuracy(&[], &[], 1.0).is_err());
}

fn hourly(prices: &[f64]) -> Vec<MarketRecord> {
    let start = parse_timestamp("2020-01-01T00:00").unwrap();
    prices
        .iter()
        .enumerate()
        .map(|(i, &p)| MarketRecord {
            timestamp: start + TimeDelta::hours(i as i64),
            price: p,
            load: 1000.0 + (i % 24) as f64,
            temperature: 10.0,
        })
        .collect()
}

#[test]
fn perfect_forecaster_scores_perfectly() {
    let records = generate(&SynthConfig {
        hours: 300,
        ..Default::default()
    })
    .unwrap();
    let scalers = FeatureScalers::fit(&records).unwrap();
    let samples = build_windows(&records, &scalers, 5, Horizon::DayAhead).unwrap();
    let series = forecast_series(&Oracle, &samples, &scalers).unwrap();
    let r = MetricsReport::compute(
        "oracle",
        Horizon::DayAhead,
        &series,
        &scalers.price,
        &[1.0, 2.0, 3.0],
    )
    .unwrap();
    assert_eq!(r.accuracy, vec![100.0; 3]);
    assert!(r.mae < 1e-12 && r.mse < 1e-24);
    assert_eq!(r.samples, samples.len());
}

#[test]
fn naive_is_perfect_on_a_constant_series() {
    let records = hourly(&[42.5; 100]);
    let scalers = FeatureScalers::fit(&records).unwrap();
    let samples = build_windows(&records, &scalers, 3, Horizon::HourAhead).unwrap();
    let series = forecast_series(&Model::naive(Horizon::HourAhead), &samples, &scalers).unwrap();
    assert!(series.predicted.iter().all(|&p| p == 42.5));
    assert_eq!(
        threshold_accuracy(&series.predicted, &series.actual, 1.0).unwrap(),
        100.0
    );
}

#[test]
fn naive_model_reads_the_last_price() {
    let prices: Vec<f64> = (0..60).map(|i| 20.0 + i as f64).collect();
    let records = hourly(&prices);
    let scalers = FeatureScalers::fit(&records).unwrap();
    let samples = build_windows(&records, &scalers, 4, Horizon::HourAhead).unwrap();
    for s in &samples {
        let scaled = Model::naive(Horizon::HourAhead).forecast(s).unwrap();
        assert_eq!(scaled, s.last_row()[PRICE_FEATURE]);
        assert!((scalers.inverse_price(scaled).unwrap() - prices[s.target_index - 1]).abs() < 1e-9);
    }
}

#[test]
fn report_metrics_are_in_scaled_units() {
    let series = ForecastSeries {
        timestamps: vec![parse_timestamp("2020-01-01T00:00").unwrap(); 2],
        actual: vec![10.0, 20.0],
        predicted: vec![12.0, 20.0],
    };
    let price = MinMaxScaler::fitted(&[0.0, 100.0]).unwrap();
    let r = MetricsReport::compute("m", Horizon::HourAhead, &series, &price, &[1.0, 2.0]).unwrap();
    assert_eq!(r.accuracy, vec![50.0, 100.0]);
    assert!((r.mae - 0.01).abs() < 1e-12);
    assert!((r.mse - 0.0002).abs() < 1e-12);
}

#[test]
fn disabled_stream_passes_forecasts_through() {
    let start = parse_timestamp("2020-01-01T00:00").unwrap();
    let mut stream =
        CorrectionStream::new(CorrectionConfig::disabled(), 0.0, Horizon::HourAhead).unwrap();
    for i in 0..200 {
        let raw = (i as f64 * 0.37).sin() * 50.0;
        let c = stream
            .step(
                start + TimeDelta::hours(i),
                raw,
                raw + 30.0 * (i % 3) as f64,
            )
            .unwrap();
        assert!(!c.fired);
        assert_eq!(c.corrected.to_bits(), raw.to_bits());
    }
}

#[test]
fn quantile_table_is_monotone() {
    let prices: Vec<f64> = (0..500).map(|i| ((i * 7919) % 503) as f64).collect();
    let q = PriceQuantiles::from_prices(&prices).unwrap();
    assert!(q.table.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(q.quantile(0.0).unwrap(), 0.0);
    assert_eq!(q.quantile(1.0).unwrap(), 502.0);
}

#[test]
fn infinite_threshold_makes_ilrcn_equal_lrcn() {
    let records = generate(&SynthConfig {
        hours: 500,
        spike_rate: 0.03,
        ..Default::default()
    })
    .unwrap();
    let (train, test) = records.split_at(400);
    let spec = WindowSpec::new(4, Horizon::HourAhead).unwrap();
    let data = prepare_dataset(train, spec, SplitConfig::default()).unwrap();
    let model_spec = ModelSpec::Lrcn(LrcnConfig {
        conv1_filters: 4,
        conv2_filters: 4,
        hidden: vec![4, 4],
        ..LrcnConfig::default()
    });
    let cfg = TrainingConfig {
        max_epochs: 3,
        ..Default::default()
    };
    let (artifact, _) = train_spec(&model_spec, &data, &cfg, None).unwrap();
    let snapshot = artifact.clone();
    let samples = build_windows(test, &artifact.scalers, 4, Horizon::HourAhead).unwrap();

    let off = CorrectionConfig::disabled();
    let reports = evaluate_artifact(&artifact, &samples, &[1.0, 2.0, 3.0], Some(&off)).unwrap();
    assert_eq!(reports[0].model, "LRCN");
    assert_eq!(reports[1].model, "ILRCN");
    assert_eq!(reports[0].accuracy, reports[1].accuracy);
    assert_eq!(reports[0].mae, reports[1].mae);

    let raw = forecast_series(&artifact.model, &samples, &artifact.scalers).unwrap();
    let on = corrected_series(
        &artifact.model,
        &samples,
        &artifact,
        &CorrectionConfig::default(),
    )
    .unwrap();
    assert_eq!(raw.actual, on.actual);
    assert_eq!(artifact, snapshot);
}

#[test]
fn correction_on_a_non_lrcn_artifact_is_refused() {
    let records = generate(&SynthConfig {
        hours: 300,
        ..Default::default()
    })
    .unwrap();
    let data = prepare_dataset(
        &records,
        WindowSpec::new(3, Horizon::HourAhead).unwrap(),
        SplitConfig::default(),
    )
    .unwrap();
    let (artifact, _) =
        train_spec(&ModelSpec::Naive, &data, &TrainingConfig::default(), None).unwrap();
    let err = evaluate_artifact(
        &artifact,
        &data.validation,
        &[1.0],
        Some(&CorrectionConfig::default()),
    )
    .unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
