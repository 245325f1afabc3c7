//! Command-line front end: `synth`, `train`, `eval`, `benchmark`,
//! `gradcheck` and `export-plot`.

mod config;
mod plot;

pub use config::RunConfig;
pub use plot::{plot_csv, plot_svg};

use crate::data::{label_days, parse_csv, prepare, zscore_normalize, PatientSeries, Prepared, WindowSample};
use crate::diagnostics::gradcheck_suite;
use crate::error::{Error, Result};
use crate::experiment::{fit_and_evaluate, BenchmarkTable, ModelSpec};
use crate::metrics::MetricsReport;
use crate::model::{load_checkpoint, save_checkpoint, Variant};
use crate::synth::{generate_patient, SynthConfig};
use crate::train::{evaluate, sha256_hex, RunManifest, TrainHistory};
use clap::{Args, Parser, Subcommand};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

#[derive(Debug, Parser)]
#[command(name = "seizureformer", version, about = "Multi-day seizure-risk forecasting from daily biomarker counts")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Flat key=value config file (a run manifest also works).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic patient series as CSV.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Defaults to the `days` config key.
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the network on one patient and horizon.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Remove a block: none, cnn, se, cvt or all.
        #[arg(long)]
        ablate: Option<String>,
        /// Directory for checkpoint, manifest and history.
        #[arg(long, default_value = "run")]
        out: PathBuf,
    },
    /// Score a saved checkpoint on a series.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        horizon: usize,
        /// Write a manifest with the metrics here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train every ablation variant and baseline per (seed, horizon).
    Benchmark {
        #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4")]
        cohort_seeds: Vec<u64>,
        /// Defaults to the `horizons` config key.
        #[arg(long, value_delimiter = ',')]
        horizons: Option<Vec<usize>>,
        /// Subset of models by key; all by default.
        #[arg(long, value_delimiter = ',')]
        models: Option<Vec<String>>,
        /// Worker threads; 0 uses every core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Finite-difference check of every operation, layer and the full model.
    Gradcheck {
        /// Corrupt the backward rule of an operation, as OP or OP:FACTOR.
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
    /// Per-day z-scores and high-risk markers as CSV plus an SVG chart.
    ExportPlot {
        #[arg(long)]
        data: PathBuf,
        /// CSV path; the SVG is written beside it with an `.svg` extension.
        #[arg(long)]
        out: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and
/// returns the process exit code.
pub fn main_with_args<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = if e.use_stderr() { write!(err, "{e}") } else { write!(out, "{e}") };
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = match &cli.global.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    for o in &cli.global.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    match cli.command {
        Command::Synth { seed, days, out: path } => cmd_synth(&cfg, seed, days, &path, out),
        Command::Train { data, horizon, ablate, out: dir } => cmd_train(cfg, &data, horizon, ablate.as_deref(), &dir, out),
        Command::Eval { checkpoint, data, horizon, out: path } => {
            cmd_eval(cfg, &checkpoint, &data, horizon, path.as_deref(), out)
        }
        Command::Benchmark { cohort_seeds, horizons, models, threads, out: path } => {
            cmd_benchmark(&cfg, &cohort_seeds, horizons, models, threads, path.as_deref(), out)
        }
        Command::Gradcheck { inject_fault } => cmd_gradcheck(inject_fault.as_deref(), out),
        Command::ExportPlot { data, out: path } => cmd_export_plot(&cfg, &data, &path, out),
    }
}

fn io_err(e: std::io::Error) -> Error {
    Error::Io(e)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

fn load_series(path: &Path, out: &mut dyn Write) -> Result<(PatientSeries, String)> {
    let bytes = std::fs::read(path)?;
    let (series, report) = parse_csv(path)?;
    if !report.gaps.is_empty() {
        writeln!(out, "note: {} gap(s) in {}", report.gaps.len(), path.display()).map_err(io_err)?;
    }
    Ok((series, sha256_hex(&bytes)))
}

fn describe_counts(p: &Prepared) -> String {
    let [tr, va, te] = p.splits.class_counts();
    format!(
        "train {}+/{}-, val {}+/{}-, test {}+/{}-",
        tr.0, tr.1, va.0, va.1, te.0, te.1
    )
}

fn cmd_synth(cfg: &RunConfig, seed: u64, days: Option<usize>, path: &Path, out: &mut dyn Write) -> Result<()> {
    let synth = SynthConfig { seed, days: days.unwrap_or(cfg.experiment.synth.days), ..cfg.experiment.synth.clone() };
    let series = generate_patient(&synth)?;
    let csv = series.to_csv();
    write_file(path, &csv)?;
    let labels = label_days(&series, cfg.experiment.pipeline.labels)?;
    writeln!(
        out,
        "wrote {} days to {} (sha256 {})\nhigh-risk prevalence {:.4} ({} of {} labeled days)",
        series.len(),
        path.display(),
        sha256_hex(csv.as_bytes()),
        labels.prevalence(),
        labels.high_risk_days(),
        labels.labeled_days()
    )
    .map_err(io_err)?;
    Ok(())
}

fn history_csv(h: &TrainHistory) -> String {
    let mut s = String::from("epoch,train_loss,val_roc_auc\n");
    for (e, (l, a)) in h.train_loss.iter().zip(&h.val_roc_auc).enumerate() {
        writeln!(s, "{e},{l:.10},{a:.10}").unwrap();
    }
    s
}

fn cmd_train(
    mut cfg: RunConfig,
    data: &Path,
    horizon: usize,
    ablate: Option<&str>,
    dir: &Path,
    out: &mut dyn Write,
) -> Result<()> {
    cfg.check_horizon(horizon)?;
    if let Some(a) = ablate {
        let v = Variant::from_ablation(a)?;
        cfg.experiment.model = cfg.experiment.model.clone().with_variant(v);
    }
    let (series, data_hash) = load_series(data, out)?;
    let prepared = prepare(&series, &cfg.experiment.pipeline, horizon)?;
    let counts = describe_counts(&prepared);
    let variant = cfg.experiment.model.variant();
    let seed = cfg.experiment.train.seed;
    let fit = fit_and_evaluate(&prepared, ModelSpec::Network(variant), &cfg.experiment, seed).map_err(|e| match e {
        Error::Degenerate(m) => Error::Degenerate(format!("{m}; class counts: {counts}")),
        other => other,
    })?;
    let history = fit.history.expect("network fits record history");
    let network = fit.network.expect("network fits return the model");

    std::fs::create_dir_all(dir)?;
    save_checkpoint(&network, &dir.join("checkpoint.txt"))?;
    write_file(&dir.join("history.csv"), &history_csv(&history))?;

    let mut m = RunManifest::new();
    m.extend("config", cfg.to_pairs());
    m.set("run.command", "train");
    m.set("run.data", data.display());
    m.set("run.data_sha256", data_hash);
    m.set("run.patient_id", &series.patient_id);
    m.set("run.horizon", horizon);
    m.set("run.variant", variant.label());
    m.set("run.seed", seed);
    m.set("run.class_counts", &counts);
    m.set("run.pos_weight", history.pos_weight);
    m.set("run.epochs", history.epochs());
    m.set("run.best_epoch", history.best_epoch);
    m.set("run.stop_reason", history.stop_reason.as_str());
    m.set("run.num_weights", network.num_weights());
    m.set("metric.best_val_roc_auc", history.best_val_roc_auc());
    m.set("metric.test_roc_auc", fit.test.roc_auc);
    m.set("metric.test_pr_auc", fit.test.pr_auc);
    m.write(&dir.join("manifest.txt"))?;

    writeln!(
        out,
        "{} | horizon {horizon} | {} epochs (best {}, {})\n{counts}\ntest ROC AUC {:.4}  PR AUC {:.4}\nwrote {}",
        variant.label(),
        history.epochs(),
        history.best_epoch,
        history.stop_reason.as_str(),
        fit.test.roc_auc,
        fit.test.pr_auc,
        dir.display()
    )
    .map_err(io_err)?;
    Ok(())
}

fn metrics_or_na(samples: &[WindowSample], report: Result<MetricsReport>) -> Result<String> {
    match report {
        Ok(r) => Ok(format!("{:.6},{:.6},{}", r.roc_auc, r.pr_auc, samples.len())),
        Err(Error::Degenerate(_)) => Ok(format!("NA,NA,{}", samples.len())),
        Err(e) => Err(e),
    }
}

fn cmd_eval(
    mut cfg: RunConfig,
    checkpoint: &Path,
    data: &Path,
    horizon: usize,
    manifest: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    cfg.check_horizon(horizon)?;
    let model = load_checkpoint(checkpoint)?;
    cfg.experiment.pipeline.lookback = model.config().lookback;
    let (series, data_hash) = load_series(data, out)?;
    let prepared = prepare(&series, &cfg.experiment.pipeline, horizon)?;
    let splits = &prepared.splits;

    let mut m = RunManifest::new();
    m.extend("config", cfg.to_pairs());
    m.set("run.command", "eval");
    m.set("run.checkpoint", checkpoint.display());
    m.set("run.data", data.display());
    m.set("run.data_sha256", data_hash);
    m.set("run.horizon", horizon);
    m.set("run.variant", model.config().variant().label());
    writeln!(out, "split,roc_auc,pr_auc,samples").map_err(io_err)?;
    for (name, samples) in [("train", &splits.train), ("val", &splits.val), ("test", &splits.test)] {
        let line = metrics_or_na(samples, evaluate(&model, samples))?;
        let mut parts = line.split(',');
        m.set(format!("metric.{name}_roc_auc"), parts.next().unwrap_or("NA"));
        m.set(format!("metric.{name}_pr_auc"), parts.next().unwrap_or("NA"));
        writeln!(out, "{name},{line}").map_err(io_err)?;
    }
    if let Some(path) = manifest {
        write_file(path, &m.render())?;
    }
    Ok(())
}

fn cmd_benchmark(
    cfg: &RunConfig,
    seeds: &[u64],
    horizons: Option<Vec<usize>>,
    models: Option<Vec<String>>,
    threads: usize,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> Result<()> {
    let horizons = horizons.unwrap_or_else(|| cfg.horizons.clone());
    let models = match models {
        Some(keys) => keys.iter().map(|k| ModelSpec::parse(k)).collect::<Result<Vec<_>>>()?,
        None => ModelSpec::all(),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let table = pool.install(|| BenchmarkTable::run(&models, seeds, &horizons, &cfg.experiment))?;
    for c in table.failures() {
        writeln!(
            out,
            "NA: {} seed {} horizon {}: {}",
            c.model.key(),
            c.seed,
            c.horizon,
            c.failure.as_deref().unwrap_or("unknown")
        )
        .map_err(io_err)?;
    }
    let csv = table.to_csv();
    match path {
        Some(p) => {
            write_file(p, &csv)?;
            writeln!(out, "wrote {} cells to {}", table.cells.len(), p.display()).map_err(io_err)?;
        }
        None => out.write_all(csv.as_bytes()).map_err(io_err)?,
    }
    Ok(())
}

fn parse_fault(spec: &str) -> Result<(String, f64)> {
    match spec.split_once(':') {
        None => Ok((spec.to_string(), 2.0)),
        Some((op, f)) => {
            let factor = f
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("fault factor `{f}` is not a number")))?;
            Ok((op.to_string(), factor))
        }
    }
}

fn cmd_gradcheck(fault: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let fault = fault.map(parse_fault).transpose()?;
    let results = gradcheck_suite(fault.as_ref().map(|(op, f)| (op.as_str(), *f)))?;
    for r in &results {
        writeln!(out, "{}", r.line()).map_err(io_err)?;
    }
    let failed: Vec<&str> = results.iter().filter(|r| !r.passed()).map(|r| r.name.as_str()).collect();
    if failed.is_empty() {
        writeln!(out, "all {} checks passed", results.len()).map_err(io_err)?;
        Ok(())
    } else {
        Err(Error::Autodiff(format!("gradient check failed for {}", failed.join(", "))))
    }
}

fn cmd_export_plot(cfg: &RunConfig, data: &Path, path: &Path, out: &mut dyn Write) -> Result<()> {
    let (series, _) = load_series(data, out)?;
    let labels = label_days(&series, cfg.experiment.pipeline.labels)?;
    let normalized = zscore_normalize(&series);
    let svg_path = path.with_extension("svg");
    write_file(path, &plot_csv(&normalized, &labels)?)?;
    write_file(&svg_path, &plot_svg(&normalized, &labels)?)?;
    writeln!(
        out,
        "wrote {} rows to {} and {} ({} high-risk days)",
        series.len(),
        path.display(),
        svg_path.display(),
        labels.high_risk_days()
    )
    .map_err(io_err)?;
    Ok(())
}
