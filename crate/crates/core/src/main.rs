use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::error::ErrorKind;
use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde_json::json;

use calibra::io::{self, Dtype, SaveOptions};
use calibra::metrics::{BinningScheme, MetricsConfig, DEFAULT_BINS, DEFAULT_PIECE_KNN};
use calibra::model::DEFAULT_INV_TEMPERATURE;
use calibra::report::{
    self, check_argmax_preserved, parse_sweep_values, CompareReport, Method, PipelineConfig,
    SweepParam,
};
use calibra::synth::{self, ScenarioSpec};
use calibra::{CacParams, FittedCalibrator, LabeledDataset};

/// Confidence calibration toolkit for fine-tuned contrastive classifiers.
#[derive(Parser)]
#[command(name = "calibra", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibration metrics of the uncalibrated fine-tuned model.
    Metrics(MetricsCmd),
    /// Apply one calibration method and write the calibrated outputs.
    Calibrate(CalibrateCmd),
    /// Evaluate several methods side by side.
    Compare(CompareCmd),
    /// Generate a synthetic dataset from a scenario spec.
    Synth(SynthCmd),
    /// Contrast vs ECE over a grid of scenario specs.
    Study(StudyCmd),
    /// ECE of CAC across values of one parameter.
    Sweep(SweepCmd),
    /// Reliability table (lo,hi,count,acc,conf) of a method.
    Reliability(ReliabilityCmd),
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    EqualWidth,
    EqualMass,
}

#[derive(Args)]
struct MetricOpts {
    /// Number of confidence bins.
    #[arg(long, env = "CALIBRA_BINS", default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Binning scheme for ECE and MCE.
    #[arg(long, value_enum, default_value = "equal-width")]
    scheme: Scheme,
    /// Neighbours used for PIECE proximity.
    #[arg(long, default_value_t = DEFAULT_PIECE_KNN)]
    piece_knn: usize,
}

impl MetricOpts {
    fn config(&self) -> MetricsConfig {
        let mut cfg = MetricsConfig::with_bins(self.bins);
        cfg.binning.scheme = match self.scheme {
            Scheme::EqualWidth => BinningScheme::EqualWidth,
            Scheme::EqualMass => BinningScheme::EqualMass,
        };
        cfg.piece.k_nn = self.piece_knn;
        cfg
    }
}

#[derive(Args)]
struct CacOpts {
    /// Contrast sensitivity of the weight.
    #[arg(long, default_value_t = 15.0)]
    k: f64,
    /// Weight at zero contrast.
    #[arg(long, default_value_t = 1.10)]
    alpha: f64,
    /// Lower threshold of the unsquared band.
    #[arg(long, default_value_t = 0.9)]
    l1: f64,
    /// Upper threshold of the unsquared band.
    #[arg(long, default_value_t = 1.0)]
    l2: f64,
    /// Logit scale of the model (1/τ).
    #[arg(long, env = "CALIBRA_INV_TEMP", default_value_t = DEFAULT_INV_TEMPERATURE)]
    inv_temp: f64,
}

impl CacOpts {
    fn params(&self) -> CacParams<f64> {
        CacParams {
            k: self.k,
            alpha: self.alpha,
            lambda1: self.l1,
            lambda2: self.l2,
            inv_temperature: self.inv_temp,
        }
    }
}

#[derive(Args)]
struct MetricsCmd {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    metrics: MetricOpts,
    /// Logit scale of the model (1/τ).
    #[arg(long, env = "CALIBRA_INV_TEMP", default_value_t = DEFAULT_INV_TEMPERATURE)]
    inv_temp: f64,
    /// Also write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CalibrateCmd {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// One of conf, cac, ts, hb, ir, mir.
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Labelled split to fit a baseline on (not allowed for cac).
    #[arg(long)]
    fit: Option<PathBuf>,
    /// Previously saved calibrator to apply instead of fitting.
    #[arg(long, conflicts_with = "fit")]
    calibrator: Option<PathBuf>,
    /// Directory for predictions.csv, logits.calk, calibrator.json, trace.csv.
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    cac: CacOpts,
    #[command(flatten)]
    metrics: MetricOpts,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct CompareCmd {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated methods, in output order.
    #[arg(long, value_delimiter = ',', value_parser = parse_method,
          default_value = "conf,cac,ts,hb,ir,mir")]
    methods: Vec<Method>,
    /// Labelled split to fit baselines on.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[command(flatten)]
    cac: CacOpts,
    #[command(flatten)]
    metrics: MetricOpts,
    /// Also write the report as CSV.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SynthCmd {
    /// Scenario spec (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory for the dataset and manifest.
    #[arg(long)]
    out: PathBuf,
    /// Payload type of the written matrices (f32 or f64).
    #[arg(long, value_parser = parse_dtype, default_value = "f32")]
    dtype: Dtype,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct StudyCmd {
    /// JSON array of scenario specs.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long, env = "CALIBRA_BINS", default_value_t = DEFAULT_BINS)]
    bins: usize,
    /// Also write `contrast,ece,spec_id` rows to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct SweepCmd {
    /// Dataset manifest; repeat for one table row per dataset.
    #[arg(long, required = true)]
    data: Vec<PathBuf>,
    /// One of k, alpha, thresholds.
    #[arg(long, value_parser = parse_param)]
    param: SweepParam,
    /// Comma-separated values; `l1:<v>` / `l2:<v>` for thresholds.
    #[arg(long, value_delimiter = ',', required = true)]
    values: Vec<String>,
    #[command(flatten)]
    cac: CacOpts,
    #[command(flatten)]
    metrics: MetricOpts,
    /// Also write the long-format CSV to this file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct ReliabilityCmd {
    /// Dataset manifest.
    #[arg(long)]
    data: PathBuf,
    /// One of conf, cac, ts, hb, ir, mir.
    #[arg(long, value_parser = parse_method, default_value = "conf")]
    method: Method,
    /// Labelled split to fit baselines on.
    #[arg(long)]
    fit: Option<PathBuf>,
    #[command(flatten)]
    cac: CacOpts,
    #[command(flatten)]
    metrics: MetricOpts,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print machine-readable JSON instead of a table.
    #[arg(long)]
    json: bool,
}

fn parse_method(s: &str) -> std::result::Result<Method, String> {
    s.parse().map_err(|e: calibra::CalibraError| e.to_string())
}

fn parse_param(s: &str) -> std::result::Result<SweepParam, String> {
    s.parse().map_err(|e: calibra::CalibraError| e.to_string())
}

fn parse_dtype(s: &str) -> std::result::Result<Dtype, String> {
    s.parse().map_err(|e: calibra::CalibraError| e.to_string())
}

fn usage_error(subcommand: &str, kind: ErrorKind, msg: impl std::fmt::Display) -> ! {
    let mut cmd = Cli::command();
    cmd.build();
    match cmd.find_subcommand_mut(subcommand) {
        Some(sub) => sub.error(kind, msg).exit(),
        None => cmd.error(kind, msg).exit(),
    }
}

fn load(path: &Path) -> Result<LabeledDataset<f64>> {
    io::load_dataset(path).with_context(|| format!("loading {}", path.display()))
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn emit(json: bool, text: String, value: serde_json::Value) {
    let out = if json {
        serde_json::to_string_pretty(&value).expect("json") + "\n"
    } else {
        text
    };
    // a closed pipe (`| head`) is not an error worth reporting
    let _ = std::io::stdout().lock().write_all(out.as_bytes());
}

fn dataset_name(path: &Path) -> String {
    let dir = path
        .parent()
        .and_then(|p| p.file_name())
        .map(|n| n.to_string_lossy().into_owned());
    let stem = path.file_stem().map(|n| n.to_string_lossy().into_owned());
    match (dir, stem) {
        (Some(d), Some(s)) if s == "manifest" => d,
        (_, Some(s)) => s,
        (Some(d), None) => d,
        (None, None) => path.display().to_string(),
    }
}

fn cmd_metrics(c: MetricsCmd) -> Result<()> {
    let data = load(&c.data)?;
    let cfg = PipelineConfig {
        cac: CacParams {
            inv_temperature: c.inv_temp,
            ..CacParams::default()
        },
        metrics: c.metrics.config(),
    };
    let report = report::compare(&data, &[Method::Conf], None, &cfg)?;
    if let Some(out) = &c.out {
        write_file(out, &report.to_csv())?;
    }
    emit(
        c.json,
        report.to_text(),
        serde_json::to_value(&report.rows[0])?,
    );
    Ok(())
}

fn cmd_calibrate(c: CalibrateCmd) -> Result<()> {
    let method = c.method;
    if method == Method::Cac && c.fit.is_some() {
        usage_error(
            "calibrate",
            ErrorKind::ArgumentConflict,
            "--fit cannot be used with --method cac: CAC is training-free",
        );
    }
    if method == Method::Cac && c.calibrator.is_some() {
        usage_error(
            "calibrate",
            ErrorKind::ArgumentConflict,
            "--calibrator cannot be used with --method cac",
        );
    }
    if method.needs_fit() && c.fit.is_none() && c.calibrator.is_none() {
        usage_error(
            "calibrate",
            ErrorKind::MissingRequiredArgument,
            format!("--method {method} requires --fit <MANIFEST> or --calibrator <JSON>"),
        );
    }
    let cfg = PipelineConfig {
        cac: c.cac.params(),
        metrics: c.metrics.config(),
    };
    let data = load(&c.data)?;
    let calibrator: Option<FittedCalibrator<f64>> = match (&c.fit, &c.calibrator) {
        (Some(fit), _) => Some(report::fit_calibrator(method, &load(fit)?, &cfg)?),
        (None, Some(path)) => Some(FittedCalibrator::load(path)?),
        _ => None,
    };
    let before = report::apply_method(Method::Conf, &data, None, &cfg)?;
    let after = report::apply_method(method, &data, calibrator.as_ref(), &cfg)?;
    check_argmax_preserved(&before.prediction, &after.prediction)?;
    let table = CompareReport {
        rows: vec![
            report::report_for(&before, &data, &cfg)?,
            report::report_for(&after, &data, &cfg)?,
        ],
    };

    if let Some(dir) = &c.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let mut csv = String::from("sample_id,label,predicted,confidence,correct\n");
        for (i, (&p, &conf)) in after
            .prediction
            .labels
            .iter()
            .zip(&after.prediction.confidences)
            .enumerate()
        {
            let y = data.labels()[i];
            csv.push_str(&format!("{i},{y},{p},{conf},{}\n", u8::from(p == y)));
        }
        write_file(&dir.join("predictions.csv"), &csv)?;
        if let Some(logits) = &after.logits {
            io::write_matrix(dir.join("logits.calk"), logits, Dtype::F64)?;
        }
        if let Some(cal) = &after.calibrator {
            cal.save(&dir.join("calibrator.json"))?;
        }
        if let Some(trace) = &after.trace {
            let mut csv = String::from("sample_id,z,gamma,gamma_hat\n");
            for i in 0..trace.z.len() {
                csv.push_str(&format!(
                    "{i},{},{},{}\n",
                    trace.z[i], trace.gamma[i], trace.gamma_hat[i]
                ));
            }
            write_file(&dir.join("trace.csv"), &csv)?;
        }
    }

    let mut text = table.to_text();
    if let Some(FittedCalibrator::Temperature { temperature }) = &after.calibrator {
        text.push_str(&format!("fitted temperature: {temperature:.6}\n"));
    }
    text.push_str("predicted labels unchanged: yes\n");
    emit(
        c.json,
        text,
        json!({
            "method": method.as_str(),
            "before": table.rows[0],
            "after": table.rows[1],
            "calibrator": after.calibrator,
            "labels_unchanged": true,
        }),
    );
    Ok(())
}

fn cmd_compare(c: CompareCmd) -> Result<()> {
    if c.methods.is_empty() {
        usage_error(
            "compare",
            ErrorKind::InvalidValue,
            "--methods needs at least one method",
        );
    }
    if c.methods.iter().any(|m| m.needs_fit()) && c.fit.is_none() {
        usage_error(
            "compare",
            ErrorKind::MissingRequiredArgument,
            "methods ts, hb, ir and mir require --fit <MANIFEST>",
        );
    }
    let cfg = PipelineConfig {
        cac: c.cac.params(),
        metrics: c.metrics.config(),
    };
    let data = load(&c.data)?;
    let fit = c.fit.as_deref().map(load).transpose()?;
    let report = report::compare(&data, &c.methods, fit.as_ref(), &cfg)?;
    if let Some(out) = &c.out {
        write_file(out, &report.to_csv())?;
    }
    emit(c.json, report.to_text(), serde_json::to_value(&report)?);
    Ok(())
}

fn cmd_synth(c: SynthCmd) -> Result<()> {
    let text =
        fs::read_to_string(&c.spec).with_context(|| format!("reading {}", c.spec.display()))?;
    let spec: ScenarioSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", c.spec.display()))?;
    let data = synth::generate::<f64>(&spec)?;
    let summary = synth::summarize(&data, spec.inv_temperature)?;
    let options = SaveOptions {
        dtype: c.dtype,
        provenance: format!("synthetic: {}", serde_json::to_string(&spec)?),
    };
    let manifest = io::save_dataset_with(&data, &c.out, &options)?;
    let text = format!(
        "wrote {} ({} samples, {} classes)\naccuracy {:.4}  mean confidence {:.4}  contrast {:.6}\n",
        c.out.join(io::MANIFEST_FILE).display(),
        data.n_samples(),
        data.n_classes(),
        summary.accuracy,
        summary.mean_confidence,
        summary.contrast
    );
    emit(
        c.json,
        text,
        json!({ "manifest": manifest, "summary": summary }),
    );
    Ok(())
}

fn cmd_study(c: StudyCmd) -> Result<()> {
    let text =
        fs::read_to_string(&c.grid).with_context(|| format!("reading {}", c.grid.display()))?;
    let grid: Vec<ScenarioSpec> =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", c.grid.display()))?;
    let study = synth::correlation_study(&grid, calibra::BinningConfig::equal_width(c.bins))?;
    if let Some(out) = &c.out {
        write_file(out, &study.to_csv())?;
    }
    let text = format!("{}spearman {}\n", study.to_csv(), study.spearman);
    emit(c.json, text, serde_json::to_value(&study)?);
    Ok(())
}

fn cmd_sweep(c: SweepCmd) -> Result<()> {
    let points = match parse_sweep_values(c.param, &c.values) {
        Ok(p) => p,
        Err(e) => usage_error("sweep", ErrorKind::InvalidValue, format!("--values: {e}")),
    };
    let cfg = PipelineConfig {
        cac: c.cac.params(),
        metrics: c.metrics.config(),
    };
    let mut datasets = Vec::with_capacity(c.data.len());
    for path in &c.data {
        datasets.push((dataset_name(path), load(path)?));
    }
    let table = report::sweep(&datasets, c.param, &points, &cfg)?;
    if let Some(out) = &c.out {
        write_file(out, &table.to_csv())?;
    }
    emit(c.json, table.to_text(), serde_json::to_value(&table)?);
    Ok(())
}

fn cmd_reliability(c: ReliabilityCmd) -> Result<()> {
    if c.method == Method::Cac && c.fit.is_some() {
        usage_error(
            "reliability",
            ErrorKind::ArgumentConflict,
            "--fit cannot be used with --method cac",
        );
    }
    if c.method.needs_fit() && c.fit.is_none() {
        usage_error(
            "reliability",
            ErrorKind::MissingRequiredArgument,
            format!("--method {} requires --fit <MANIFEST>", c.method),
        );
    }
    let cfg = PipelineConfig {
        cac: c.cac.params(),
        metrics: c.metrics.config(),
    };
    let data = load(&c.data)?;
    let fit = c.fit.as_deref().map(load).transpose()?;
    let table = report::reliability_for(c.method, &data, fit.as_ref(), &cfg)?;
    let csv = table.to_csv();
    if let Some(out) = &c.out {
        write_file(out, &csv)?;
    }
    emit(c.json, csv, serde_json::to_value(&table)?);
    Ok(())
}

/// Joins the error chain, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Metrics(c) => cmd_metrics(c),
        Command::Calibrate(c) => cmd_calibrate(c),
        Command::Compare(c) => cmd_compare(c),
        Command::Synth(c) => cmd_synth(c),
        Command::Study(c) => cmd_study(c),
        Command::Sweep(c) => cmd_sweep(c),
        Command::Reliability(c) => cmd_reliability(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(1)
        }
    }
}
