//! End-to-end runs driven by a JSON configuration: generate, train,
//! predict, evaluate and compare.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::correction::{CorrectionConfig, CorrectionStream, PriceQuantiles};
use crate::data::{
    build_windows, format_timestamp, load_csv, prepare_dataset, save_csv, Horizon, MarketRecord,
    PreparedData, SplitConfig, WindowSpec, WindowedSample,
};
use crate::error::{Error, Result};
use crate::metrics::{
    forecast_series, format_table, validate_thresholds, write_report_csv, ForecastSeries,
    MetricsReport, DEFAULT_THRESHOLDS,
};
use crate::models::{Forecaster, Model, ModelKind, ModelSpec, NetFamily};
use crate::synth::{describe, generate, SeriesSummary, SynthConfig};
use crate::training::{
    fit_model, save_artifact, write_history_csv, write_loss_curve, EpochView, HistorySummary,
    ModelArtifact, TrainOutcome, TrainingConfig, FORMAT_VERSION,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    Csv(PathBuf),
    Synth(SynthConfig),
}

impl Default for DataSource {
    fn default() -> Self {
        DataSource::Synth(SynthConfig::default())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSource,
    /// Separate test CSV; when absent the last `test_fraction` of `data` is
    /// held out.
    pub test_data: Option<PathBuf>,
    pub test_fraction: f64,
    pub window_n: usize,
    pub horizon: Horizon,
    /// Horizons covered by `compare`.
    pub horizons: Vec<Horizon>,
    pub model: ModelSpec,
    /// Models trained by `compare`; an `lrcn` entry also yields the
    /// corrected ILRCN row.
    pub models: Vec<ModelSpec>,
    pub training: TrainingConfig,
    pub correction: CorrectionConfig,
    pub thresholds: Vec<f64>,
    pub output_dir: PathBuf,
    /// Master seed; overrides the synth, training and shuffle seeds.
    pub seed: u64,
    pub train_fraction: f64,
    /// Shuffle samples before the train/validation split.
    pub shuffle: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: DataSource::default(),
            test_data: None,
            test_fraction: 0.2,
            window_n: 24,
            horizon: Horizon::HourAhead,
            horizons: vec![Horizon::HourAhead, Horizon::DayAhead],
            model: ModelSpec::default(),
            models: vec![
                ModelSpec::for_kind(ModelKind::Svr),
                ModelSpec::for_kind(ModelKind::Fcnn),
                ModelSpec::for_kind(ModelKind::Lstm),
                ModelSpec::for_kind(ModelKind::Lrcn),
            ],
            training: TrainingConfig::default(),
            correction: CorrectionConfig::default(),
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            output_dir: PathBuf::from("spotcast-out"),
            seed: 0,
            train_fraction: 0.9,
            shuffle: false,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Parse {
            what: "run config".into(),
            message: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    /// Checks every field before any work starts.
    pub fn validate(&self) -> Result<()> {
        WindowSpec::new(self.window_n, self.horizon)?;
        self.training.validate()?;
        self.correction.validate()?;
        validate_thresholds(&self.thresholds)?;
        if self.test_data.is_none() && !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config(format!(
                "test_fraction must lie in (0, 1), got {}",
                self.test_fraction
            )));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(format!(
                "train_fraction must lie in (0, 1), got {}",
                self.train_fraction
            )));
        }
        if self.horizons.is_empty() {
            return Err(Error::config("horizons must not be empty"));
        }
        match &self.data {
            DataSource::Synth(s) => s.validate()?,
            DataSource::Csv(p) if !p.is_file() => {
                return Err(Error::config(format!(
                    "data file {} does not exist",
                    p.display()
                )))
            }
            DataSource::Csv(_) => {}
        }
        if let Some(p) = &self.test_data {
            if !p.is_file() {
                return Err(Error::config(format!(
                    "test data file {} does not exist",
                    p.display()
                )));
            }
        }
        if let ModelSpec::Svr(s) = &self.model {
            s.validate()?;
        }
        Ok(())
    }

    fn synth(&self) -> Option<SynthConfig> {
        match &self.data {
            DataSource::Synth(s) => Some(SynthConfig {
                seed: self.seed,
                ..s.clone()
            }),
            DataSource::Csv(_) => None,
        }
    }

    pub fn training_config(&self) -> TrainingConfig {
        TrainingConfig {
            seed: self.seed,
            ..self.training.clone()
        }
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.train_fraction,
            shuffle_seed: self.shuffle.then_some(self.seed),
        }
    }

    /// All records of the primary source.
    pub fn records(&self) -> Result<Vec<MarketRecord>> {
        match &self.data {
            DataSource::Csv(p) => load_csv(p),
            DataSource::Synth(_) => generate(&self.synth().expect("synth source")),
        }
    }

    /// Training pool and held-out test span.
    pub fn split_records(&self) -> Result<DataSplit> {
        let all = self.records()?;
        match &self.test_data {
            Some(p) => Ok(DataSplit {
                pool_len: all.len(),
                records: all,
                test: TestSpan::Separate(load_csv(p)?),
            }),
            None => {
                let n_test = (self.test_fraction * all.len() as f64).round() as usize;
                if n_test == 0 || n_test >= all.len() {
                    return Err(Error::Sizing(format!(
                        "test_fraction {} leaves no usable train/test split of {} records",
                        self.test_fraction,
                        all.len()
                    )));
                }
                Ok(DataSplit {
                    pool_len: all.len() - n_test,
                    records: all,
                    test: TestSpan::Tail,
                })
            }
        }
    }

    fn out_path(&self, name: &str) -> PathBuf {
        self.output_dir.join(name)
    }

    fn ensure_output_dir(&self) -> Result<()> {
        fs::create_dir_all(&self.output_dir).map_err(|e| Error::io(&self.output_dir, e))
    }
}

#[derive(Debug, Clone)]
pub enum TestSpan {
    /// The records after the training pool in the same series.
    Tail,
    Separate(Vec<MarketRecord>),
}

#[derive(Debug, Clone)]
pub struct DataSplit {
    pub records: Vec<MarketRecord>,
    /// Leading records available for training and validation.
    pub pool_len: usize,
    pub test: TestSpan,
}

impl DataSplit {
    pub fn pool(&self) -> &[MarketRecord] {
        &self.records[..self.pool_len]
    }

    pub fn prepare(&self, spec: WindowSpec, split: SplitConfig) -> Result<PreparedData> {
        prepare_dataset(self.pool(), spec, split)
    }

    /// Test windows. A tail span may draw its inputs from the end of the
    /// training pool; every target lies in the test span.
    pub fn test_samples(&self, data: &PreparedData) -> Result<Vec<WindowedSample>> {
        let spec = data.spec;
        let samples = match &self.test {
            TestSpan::Tail => {
                build_windows(&self.records, &data.scalers, spec.window_n, spec.horizon)?
                    .into_iter()
                    .filter(|s| s.target_index >= self.pool_len)
                    .collect()
            }
            TestSpan::Separate(r) => build_windows(r, &data.scalers, spec.window_n, spec.horizon)?,
        };
        if samples.is_empty() {
            return Err(Error::Sizing("the test span yields no windows".into()));
        }
        Ok(samples)
    }
}

pub fn build_artifact(
    spec: &ModelSpec,
    data: &PreparedData,
    training: &TrainingConfig,
    model: Model,
    outcome: &TrainOutcome,
    train_seconds: f64,
) -> Result<ModelArtifact> {
    Ok(ModelArtifact {
        format_version: FORMAT_VERSION,
        kind: spec.kind(),
        spec: spec.clone(),
        window: data.spec,
        scalers: data.scalers,
        price_quantiles: PriceQuantiles::from_prices(&data.train_prices)?,
        training: training.clone(),
        summary: HistorySummary::from_outcome(outcome, train_seconds),
        model,
    })
}

/// Fits `spec` and wraps the result in an artifact.
pub fn train_spec(
    spec: &ModelSpec,
    data: &PreparedData,
    training: &TrainingConfig,
    observer: Option<&mut dyn FnMut(&EpochView<'_>)>,
) -> Result<(ModelArtifact, TrainOutcome)> {
    let started = Instant::now();
    let (model, outcome) = fit_model(spec, data, training, observer)?;
    let seconds = started.elapsed().as_secs_f64();
    log::info!(
        "trained {} in {seconds:.2}s over {} epochs",
        spec.kind(),
        outcome.history.len()
    );
    let artifact = build_artifact(spec, data, training, model, &outcome, seconds)?;
    Ok((artifact, outcome))
}

/// Forecasts over chronological `samples` with conditional correction of
/// the underlying forecasts.
pub fn corrected_series(
    model: &dyn Forecaster,
    samples: &[WindowedSample],
    artifact: &ModelArtifact,
    correction: &CorrectionConfig,
) -> Result<ForecastSeries> {
    let cutoff = artifact
        .price_quantiles
        .quantile(correction.high_price_quantile)?;
    let mut stream = CorrectionStream::new(*correction, cutoff, artifact.window.horizon)?;
    let raw = forecast_series(model, samples, &artifact.scalers)?;
    let mut out = ForecastSeries::default();
    let mut fired = 0;
    for i in 0..raw.len() {
        let c = stream.step(raw.timestamps[i], raw.predicted[i], raw.actual[i])?;
        fired += usize::from(c.fired);
        out.timestamps.push(raw.timestamps[i]);
        out.actual.push(raw.actual[i]);
        out.predicted.push(c.corrected);
    }
    log::info!(
        "correction fired on {fired} of {} intervals (cutoff {cutoff:.3})",
        raw.len()
    );
    Ok(out)
}

fn is_lrcn(artifact: &ModelArtifact) -> bool {
    matches!(&artifact.model, Model::Neural(n) if n.family == NetFamily::Lrcn)
}

/// Metrics for an artifact on test windows. With `correction`, emits an
/// LRCN row and an ILRCN row from the same model.
pub fn evaluate_artifact(
    artifact: &ModelArtifact,
    samples: &[WindowedSample],
    thresholds: &[f64],
    correction: Option<&CorrectionConfig>,
) -> Result<Vec<MetricsReport>> {
    let horizon = artifact.window.horizon;
    let price = &artifact.scalers.price;
    let seconds = Some(artifact.summary.train_seconds);
    let base_label = match (artifact.kind, correction) {
        (ModelKind::Ilrcn, _) | (_, Some(_)) => ModelKind::Lrcn.label(),
        (k, None) => k.label(),
    };
    let base = forecast_series(&artifact.model, samples, &artifact.scalers)?;
    let mut base_report = MetricsReport::compute(base_label, horizon, &base, price, thresholds)?;
    base_report.train_seconds = seconds;
    let mut reports = vec![base_report];
    let correction = match (artifact.kind, correction) {
        (_, Some(c)) => Some(*c),
        (ModelKind::Ilrcn, None) => Some(CorrectionConfig::default()),
        _ => None,
    };
    if let Some(c) = correction {
        if !is_lrcn(artifact) {
            return Err(Error::config(format!(
                "correction applies to lrcn models only, artifact holds {}",
                artifact.kind
            )));
        }
        let corrected = corrected_series(&artifact.model, samples, artifact, &c)?;
        let mut r = MetricsReport::compute(
            ModelKind::Ilrcn.label(),
            horizon,
            &corrected,
            price,
            thresholds,
        )?;
        r.train_seconds = seconds;
        reports.push(r);
    }
    Ok(reports)
}

pub fn check_horizon(artifact: &ModelArtifact, requested: Horizon) -> Result<()> {
    if artifact.window.horizon != requested {
        return Err(Error::config(format!(
            "artifact was trained for {} but {} was requested",
            artifact.window.horizon, requested
        )));
    }
    Ok(())
}

/// Writes `records` generated from `config` to `out` and summarises them.
pub fn run_generate(config: &SynthConfig, out: &Path) -> Result<SeriesSummary> {
    let records = generate(config)?;
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    save_csv(out, &records)?;
    describe(&records.iter().map(|r| r.price).collect::<Vec<_>>())
}

#[derive(Debug, Clone)]
pub struct TrainRun {
    pub artifact: ModelArtifact,
    pub outcome: TrainOutcome,
    pub artifact_path: PathBuf,
    pub history_path: PathBuf,
}

/// Trains `config.model` for `config.horizon` and writes the artifact,
/// the per-epoch history and the loss curve into the output directory.
pub fn run_train(config: &RunConfig) -> Result<TrainRun> {
    config.validate()?;
    log::info!("seed {}", config.seed);
    let split = config.split_records()?;
    let data = split.prepare(
        WindowSpec::new(config.window_n, config.horizon)?,
        config.split_config(),
    )?;
    let (artifact, outcome) = train_spec(&config.model, &data, &config.training_config(), None)?;
    config.ensure_output_dir()?;
    let artifact_path = config.out_path("artifact.json");
    save_artifact(&artifact, &artifact_path)?;
    let history_path = config.out_path("history.csv");
    let file = fs::File::create(&history_path).map_err(|e| Error::io(&history_path, e))?;
    write_history_csv(file, &outcome.history)?;
    let curve = config.out_path("loss_curve.dat");
    let file = fs::File::create(&curve).map_err(|e| Error::io(&curve, e))?;
    write_loss_curve(file, &outcome.history).map_err(|e| Error::io(&curve, e))?;
    Ok(TrainRun {
        artifact,
        outcome,
        artifact_path,
        history_path,
    })
}

/// Test windows for an artifact, built with the artifact's own scalers.
pub fn artifact_test_samples(
    artifact: &ModelArtifact,
    records: &[MarketRecord],
    first_target: usize,
) -> Result<Vec<WindowedSample>> {
    let samples: Vec<WindowedSample> = build_windows(
        records,
        &artifact.scalers,
        artifact.window.window_n,
        artifact.window.horizon,
    )?
    .into_iter()
    .filter(|s| s.target_index >= first_target)
    .collect();
    if samples.is_empty() {
        return Err(Error::Sizing("no test windows".into()));
    }
    Ok(samples)
}

/// Records and first test target index from the config's test span.
pub fn test_records(config: &RunConfig) -> Result<(Vec<MarketRecord>, usize)> {
    let split = config.split_records()?;
    Ok(match split.test {
        TestSpan::Tail => (split.records, split.pool_len),
        TestSpan::Separate(r) => (r, 0),
    })
}

/// Raw forecasts of `artifact` over the test span, written as
/// `timestamp,forecast,actual` to `predictions.csv`.
pub fn run_predict(
    config: &RunConfig,
    artifact: &ModelArtifact,
) -> Result<(PathBuf, ForecastSeries)> {
    let (records, first) = test_records(config)?;
    let samples = artifact_test_samples(artifact, &records, first)?;
    let series = forecast_series(&artifact.model, &samples, &artifact.scalers)?;
    config.ensure_output_dir()?;
    let path = config.out_path("predictions.csv");
    let mut w = csv::Writer::from_path(&path).map_err(|e| Error::Parse {
        what: "predictions csv".into(),
        message: e.to_string(),
    })?;
    let csv_err = |e: csv::Error| Error::Parse {
        what: "predictions csv".into(),
        message: e.to_string(),
    };
    w.write_record(["timestamp", "forecast", "actual"])
        .map_err(csv_err)?;
    for i in 0..series.len() {
        w.write_record([
            format_timestamp(series.timestamps[i]),
            format!("{}", series.predicted[i]),
            format!("{}", series.actual[i]),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok((path, series))
}

fn write_reports(config: &RunConfig, reports: &[MetricsReport], stem: &str) -> Result<()> {
    config.ensure_output_dir()?;
    let csv_path = config.out_path(&format!("{stem}.csv"));
    let file = fs::File::create(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
    write_report_csv(file, reports)?;
    let txt = config.out_path(&format!("{stem}.txt"));
    fs::write(&txt, format_table(reports)).map_err(|e| Error::io(&txt, e))
}

fn write_timing(config: &RunConfig, reports: &[MetricsReport]) -> Result<()> {
    let path = config.out_path("training_time.csv");
    let mut text = String::from("model,horizon,train_seconds\n");
    for r in reports {
        if let Some(s) = r.train_seconds {
            text.push_str(&format!("{},{},{s:.3}\n", r.model, r.horizon));
        }
    }
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

/// Evaluates an artifact on the config's test span and writes
/// `report.csv` and `report.txt`.
pub fn run_evaluate(
    config: &RunConfig,
    artifact: &ModelArtifact,
    correction: bool,
) -> Result<Vec<MetricsReport>> {
    validate_thresholds(&config.thresholds)?;
    check_horizon(artifact, config.horizon)?;
    let (records, first) = test_records(config)?;
    let samples = artifact_test_samples(artifact, &records, first)?;
    let reports = evaluate_artifact(
        artifact,
        &samples,
        &config.thresholds,
        correction.then_some(&config.correction),
    )?;
    write_reports(config, &reports, "report")?;
    Ok(reports)
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub reports: Vec<MetricsReport>,
    pub naive: Vec<MetricsReport>,
    pub failures: Vec<(String, Horizon, Error)>,
}

fn compare_horizon(
    config: &RunConfig,
    split: &DataSplit,
    horizon: Horizon,
    out: &mut CompareOutcome,
) -> Result<()> {
    let data = split.prepare(
        WindowSpec::new(config.window_n, horizon)?,
        config.split_config(),
    )?;
    let test = split.test_samples(&data)?;
    let training = config.training_config();

    let naive = Model::naive(horizon);
    let series = forecast_series(&naive, &test, &data.scalers)?;
    out.naive.push(MetricsReport::compute(
        ModelKind::Naive.label(),
        horizon,
        &series,
        &data.scalers.price,
        &config.thresholds,
    )?);

    // An lrcn entry also yields the ILRCN row unless ilrcn is listed itself.
    let has_ilrcn = config.models.iter().any(|m| m.kind() == ModelKind::Ilrcn);
    let keep = |spec: &ModelSpec, r: &MetricsReport| match spec.kind() {
        ModelKind::Lrcn => r.model == ModelKind::Lrcn.label() || !has_ilrcn,
        ModelKind::Ilrcn => r.model == ModelKind::Ilrcn.label(),
        _ => true,
    };
    let results: Vec<Result<Vec<MetricsReport>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .models
            .iter()
            .map(|spec| {
                let (data, test, training) = (&data, &test, &training);
                scope.spawn(move || {
                    let (artifact, _) = train_spec(spec, data, training, None)?;
                    let with_correction = matches!(spec.kind(), ModelKind::Lrcn | ModelKind::Ilrcn);
                    evaluate_artifact(
                        &artifact,
                        test,
                        &config.thresholds,
                        with_correction.then_some(&config.correction),
                    )
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| {
                h.join()
                    .unwrap_or_else(|_| Err(Error::State("training thread panicked".into())))
            })
            .collect()
    });
    for (spec, result) in config.models.iter().zip(results) {
        match result {
            Ok(r) => out.reports.extend(r.into_iter().filter(|r| keep(spec, r))),
            Err(e) => {
                log::error!("{} ({horizon}) failed: {e}", spec.kind());
                out.failures
                    .push((spec.kind().label().to_string(), horizon, e));
            }
        }
    }
    Ok(())
}

/// Trains every configured model on identical splits for each horizon and
/// writes `report.csv`, `report.txt`, `naive_report.csv`, `naive_report.txt`
/// and `training_time.csv`. Failed models are listed in `failures` and
/// omitted from the reports.
pub fn run_compare(config: &RunConfig) -> Result<CompareOutcome> {
    config.validate()?;
    for spec in &config.models {
        if let ModelSpec::Svr(s) = spec {
            s.validate()?;
        }
    }
    log::info!("seed {}", config.seed);
    let split = config.split_records()?;
    let mut out = CompareOutcome {
        reports: Vec::new(),
        naive: Vec::new(),
        failures: Vec::new(),
    };
    for &h in &config.horizons {
        compare_horizon(config, &split, h, &mut out)?;
    }
    write_reports(config, &out.reports, "report")?;
    write_reports(config, &out.naive, "naive_report")?;
    write_timing(config, &out.reports)?;
    Ok(out)
}
