use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spotcast_core::data::{
    build_windows, prepare_dataset, FeatureScalers, Horizon, SplitConfig, WindowSpec,
    WindowedSample, FEATURE_DIM,
};
use spotcast_core::experiment::train_spec;
use spotcast_core::models::{FcnnConfig, LrcnConfig, ModelSpec, NeuralNet};
use spotcast_core::synth::{generate, SynthConfig};
use spotcast_core::training::{
    evaluate_mse, load_artifact, plateau_schedule, save_artifact, train_network, EpochView,
    ModelArtifact, StopReason, TrainingConfig, FORMAT_VERSION,
};
use spotcast_core::Error;

fn samples(hours: usize, window: usize) -> Vec<WindowedSample> {
    let records = generate(&SynthConfig {
        hours,
        seed: 1,
        ..Default::default()
    })
    .unwrap();
    let scalers = FeatureScalers::fit(&records).unwrap();
    build_windows(&records, &scalers, window, Horizon::HourAhead).unwrap()
}

fn small_fcnn(window: usize) -> NeuralNet {
    NeuralNet::fcnn(
        window,
        FEATURE_DIM,
        &FcnnConfig { hidden: vec![8] },
        &mut ChaCha8Rng::seed_from_u64(0),
    )
    .unwrap()
}

proptest! {
    #[test]
    fn schedule_is_monotone_and_floored(
        trace in prop::collection::vec(0.0f64..1.0, 1..400),
        patience in 1usize..30,
        factor in 0.05f64..0.9,
    ) {
        let lrs = plateau_schedule(&trace, 0.01, factor, patience, 1e-5);
        let mut prev = 0.01;
        for &lr in &lrs {
            prop_assert!(lr <= prev);
            prop_assert!(lr >= 1e-5);
            prev = lr;
        }
    }
}

#[test]
fn history_accounts_for_every_epoch() {
    let data = samples(300, 4);
    let (train, val) = data.split_at(200);
    let mut net = small_fcnn(4);
    let mut seen = Vec::new();
    let mut observer = |v: &EpochView<'_>| {
        assert_eq!(v.predictions.len(), train.len());
        assert_eq!(v.targets.len(), train.len());
        seen.push(v.record.epoch);
    };
    let cfg = TrainingConfig {
        max_epochs: 12,
        batch_size: 16,
        ..Default::default()
    };
    let out = train_network(&mut net, train, val, &cfg, Some(&mut observer)).unwrap();
    assert_eq!(out.stop, StopReason::MaxEpochs);
    assert_eq!(out.history.len(), 12);
    assert_eq!(seen, (1..=12).collect::<Vec<_>>());
    assert!(out.history.train_mse().iter().all(|v| v.is_finite()));
}

#[test]
fn best_validation_parameters_are_restored() {
    let data = samples(300, 4);
    let (train, val) = data.split_at(200);
    let mut net = small_fcnn(4);
    let cfg = TrainingConfig {
        max_epochs: 30,
        initial_lr: 0.05,
        ..Default::default()
    };
    let out = train_network(&mut net, train, val, &cfg, None).unwrap();
    let vals = out.history.val_mse();
    let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    assert_eq!(out.best_val_mse, Some(min));
    assert_eq!(vals[out.best_epoch - 1], min);
    assert_eq!(evaluate_mse(&net, val).unwrap(), min);
}

#[test]
fn training_is_reproducible() {
    let data = samples(200, 3);
    let (train, val) = data.split_at(150);
    let cfg = TrainingConfig {
        max_epochs: 5,
        seed: 9,
        ..Default::default()
    };
    let mut a = small_fcnn(3);
    let mut b = small_fcnn(3);
    let ha = train_network(&mut a, train, val, &cfg, None)
        .unwrap()
        .history;
    let hb = train_network(&mut b, train, val, &cfg, None)
        .unwrap()
        .history;
    assert_eq!(ha.train_mse(), hb.train_mse());
    assert_eq!(ha.val_mse(), hb.val_mse());
}

#[test]
fn zero_epochs_leave_the_network_untouched() {
    let data = samples(100, 3);
    let mut net = small_fcnn(3);
    let before = net.predict(&data[0].inputs).unwrap();
    let cfg = TrainingConfig {
        max_epochs: 0,
        ..Default::default()
    };
    let out = train_network(&mut net, &data, &data, &cfg, None).unwrap();
    assert_eq!(out.stop, StopReason::NoEpochs);
    assert_eq!(net.predict(&data[0].inputs).unwrap(), before);
}

#[test]
fn divergence_reports_epoch_and_batch() {
    let mut data = samples(100, 3);
    data[5].target = f64::NAN;
    let mut net = small_fcnn(3);
    let cfg = TrainingConfig {
        max_epochs: 3,
        ..Default::default()
    };
    let err = train_network(&mut net, &data, &data[..10], &cfg, None).unwrap_err();
    assert!(matches!(err, Error::Training { epoch: 1, .. }), "{err}");
    assert_eq!(err.exit_code(), 3);
}

#[test]
fn bad_config_is_rejected() {
    let data = samples(100, 3);
    let mut net = small_fcnn(3);
    for cfg in [
        TrainingConfig {
            batch_size: 0,
            ..Default::default()
        },
        TrainingConfig {
            initial_lr: -1.0,
            ..Default::default()
        },
        TrainingConfig {
            plateau_factor: 1.5,
            ..Default::default()
        },
    ] {
        let err = train_network(&mut net, &data, &data, &cfg, None).unwrap_err();
        assert_eq!(err.exit_code(), 2);
    }
}

fn trained_artifact() -> (ModelArtifact, Vec<WindowedSample>) {
    let records = generate(&SynthConfig {
        hours: 400,
        seed: 2,
        ..Default::default()
    })
    .unwrap();
    let data = prepare_dataset(
        &records,
        WindowSpec::new(4, Horizon::HourAhead).unwrap(),
        SplitConfig::default(),
    )
    .unwrap();
    let cfg = TrainingConfig {
        max_epochs: 3,
        ..Default::default()
    };
    let spec = ModelSpec::Lrcn(LrcnConfig {
        conv1_filters: 4,
        conv2_filters: 4,
        hidden: vec![4, 4],
        ..LrcnConfig::default()
    });
    let (artifact, _) = train_spec(&spec, &data, &cfg, None).unwrap();
    (artifact, data.validation)
}

#[test]
fn artifact_round_trip_is_bit_exact() {
    let (artifact, val) = trained_artifact();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("a.json");
    save_artifact(&artifact, &path).unwrap();
    let loaded = load_artifact(&path).unwrap();
    assert_eq!(loaded, artifact);
    for s in &val {
        assert_eq!(
            loaded.predict_raw(s).unwrap().to_bits(),
            artifact.predict_raw(s).unwrap().to_bits()
        );
    }
}

#[test]
fn newer_format_version_is_refused() {
    let (artifact, _) = trained_artifact();
    let mut value: serde_json::Value = serde_json::from_str(&artifact.to_json().unwrap()).unwrap();
    value["format_version"] = serde_json::json!(FORMAT_VERSION + 1);
    let err = ModelArtifact::from_json(&value.to_string()).unwrap_err();
    assert!(matches!(err, Error::Version { .. }), "{err}");
}

#[test]
fn corrupt_artifact_is_a_parse_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\"format_version\": 1, \"kind\": ").unwrap();
    assert!(matches!(
        load_artifact(&path).unwrap_err(),
        Error::Parse { .. }
    ));
    assert!(matches!(
        load_artifact(&dir.path().join("missing.json")).unwrap_err(),
        Error::Io { .. }
    ));
}
