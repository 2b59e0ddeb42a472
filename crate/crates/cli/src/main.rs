use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use spotcast_core::correction::CorrectionConfig;
use spotcast_core::data::Horizon;
use spotcast_core::experiment::{
    run_compare, run_evaluate, run_generate, run_predict, run_train, DataSource, RunConfig,
};
use spotcast_core::metrics::format_table;
use spotcast_core::models::{ModelKind, ModelSpec};
use spotcast_core::synth::SynthConfig;
use spotcast_core::training::load_artifact;
use spotcast_core::Error;

#[derive(Parser)]
#[command(
    name = "spotcast",
    version,
    about = "Hourly electricity price forecasting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic hourly market CSV and print its summary.
    Generate(GenerateArgs),
    /// Train one model and write its artifact and history.
    Train(Common),
    /// Forecast the test span with a trained artifact.
    Predict(ArtifactArgs),
    /// Score a trained artifact on the test span.
    Evaluate(EvaluateArgs),
    /// Train every configured model for each horizon and tabulate them.
    Compare(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output_dir: Option<PathBuf>,
    /// Training data CSV; replaces the configured source.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Held-out test CSV.
    #[arg(long)]
    test_data: Option<PathBuf>,
    /// Window length in hours.
    #[arg(long)]
    window: Option<usize>,
    /// hour_ahead or day_ahead.
    #[arg(long)]
    horizon: Option<Horizon>,
    /// naive, svr, fcnn, lstm, lrcn or ilrcn, with default architecture.
    #[arg(long)]
    model: Option<ModelKind>,
    #[arg(long)]
    max_epochs: Option<usize>,
    /// Comma-separated accuracy thresholds in currency.
    #[arg(long, value_delimiter = ',')]
    thresholds: Option<Vec<f64>>,
}

#[derive(Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    hours: Option<usize>,
    /// Output CSV; defaults to data.csv in the output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ArtifactArgs {
    #[command(flatten)]
    common: Common,
    /// Artifact file; defaults to artifact.json in the output directory.
    #[arg(long)]
    artifact: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[command(flatten)]
    inner: ArtifactArgs,
    /// Also report the corrected (ILRCN) forecasts of an LRCN artifact.
    #[arg(long)]
    correction: bool,
    /// Disable the correction gate; ILRCN then equals LRCN.
    #[arg(long)]
    no_gate: bool,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(d) = &self.output_dir {
            cfg.output_dir = d.clone();
        }
        if let Some(d) = &self.data {
            cfg.data = DataSource::Csv(d.clone());
        }
        if let Some(t) = &self.test_data {
            cfg.test_data = Some(t.clone());
        }
        if let Some(w) = self.window {
            cfg.window_n = w;
        }
        if let Some(h) = self.horizon {
            cfg.horizon = h;
            cfg.horizons = vec![h];
        }
        if let Some(k) = self.model {
            cfg.model = ModelSpec::for_kind(k);
        }
        if let Some(e) = self.max_epochs {
            cfg.training.max_epochs = e;
        }
        if let Some(t) = &self.thresholds {
            cfg.thresholds = t.clone();
        }
        Ok(cfg)
    }
}

fn artifact_path(args: &ArtifactArgs, cfg: &RunConfig) -> PathBuf {
    args.artifact
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("artifact.json"))
}

fn generate(args: &GenerateArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let mut synth = match &cfg.data {
        DataSource::Synth(s) => s.clone(),
        DataSource::Csv(_) => SynthConfig::default(),
    };
    synth.seed = cfg.seed;
    if let Some(h) = args.hours {
        synth.hours = h;
    }
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| cfg.output_dir.join("data.csv"));
    let summary = run_generate(&synth, &out)?;
    println!(
        "wrote {} ({} records, seed {})",
        out.display(),
        synth.hours,
        synth.seed
    );
    println!("{summary}");
    Ok(())
}

fn train(args: &Common) -> Result<(), Error> {
    let cfg = args.resolve()?;
    let run = run_train(&cfg)?;
    let s = &run.artifact.summary;
    println!(
        "trained {} ({}, window {}) in {:.2}s: {} epochs, best epoch {}, best val mse {}",
        run.artifact.kind,
        run.artifact.window.horizon,
        run.artifact.window.window_n,
        s.train_seconds,
        s.epochs,
        s.best_epoch,
        s.best_val_mse.map_or("n/a".into(), |v| format!("{v:.6e}")),
    );
    println!("artifact: {}", run.artifact_path.display());
    println!("history:  {}", run.history_path.display());
    Ok(())
}

fn predict(args: &ArtifactArgs) -> Result<(), Error> {
    let cfg = args.common.resolve()?;
    let artifact = load_artifact(&artifact_path(args, &cfg))?;
    let (path, series) = run_predict(&cfg, &artifact)?;
    println!("wrote {} forecasts to {}", series.len(), path.display());
    Ok(())
}

fn evaluate(args: &EvaluateArgs) -> Result<(), Error> {
    let mut cfg = args.inner.common.resolve()?;
    let artifact = load_artifact(&artifact_path(&args.inner, &cfg))?;
    if args.inner.common.horizon.is_none() && args.inner.common.config.is_none() {
        cfg.horizon = artifact.window.horizon;
    }
    if args.no_gate {
        cfg.correction = CorrectionConfig {
            error_threshold: f64::INFINITY,
            ..cfg.correction
        };
    }
    let reports = run_evaluate(&cfg, &artifact, args.correction || args.no_gate)?;
    print!("{}", format_table(&reports));
    println!("report: {}", cfg.output_dir.join("report.csv").display());
    Ok(())
}

fn compare(args: &Common) -> Result<(), Error> {
    let cfg = args.resolve()?;
    let out = run_compare(&cfg)?;
    print!("{}", format_table(&out.reports));
    println!("naive baselines");
    print!("{}", format_table(&out.naive));
    println!("report: {}", cfg.output_dir.join("report.csv").display());
    let mut failures = out.failures.into_iter();
    if let Some((model, horizon, err)) = failures.next() {
        eprintln!("{model} ({horizon}) failed; the report omits it");
        for (model, horizon, e) in failures {
            eprintln!("{model} ({horizon}) failed: {e}");
        }
        return Err(err);
    }
    Ok(())
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SPOTCAST_LOG", "warn"))
        .format_timestamp(None)
        .init();
}

fn main() -> ExitCode {
    init_logging();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Evaluate(a) => evaluate(a),
        Command::Compare(a) => compare(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
