//! Seeded train/evaluate cells over synthetic cohorts and the results
//! table built from them.

use crate::baselines::{logistic_fit, poisson_fit, BaselineKind, DLinear};
use crate::data::{prepare, PatientSeries, PipelineConfig, Prepared};
use crate::error::{Error, Result};
use crate::metrics::MetricsReport;
use crate::model::{ModelConfig, SeizureFormer, Variant};
use crate::synth::{generate_patient, SynthConfig};
use crate::train::{evaluate, train_loop, TrainConfig, TrainHistory};
use rayon::prelude::*;
use std::fmt::Write as _;

/// A network variant or a baseline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ModelSpec {
    Network(Variant),
    Baseline(BaselineKind),
}

impl ModelSpec {
    /// Every ablation variant followed by every baseline.
    pub fn all() -> Vec<ModelSpec> {
        Variant::ABLATIONS
            .iter()
            .map(|&v| ModelSpec::Network(v))
            .chain(BaselineKind::ALL.iter().map(|&b| ModelSpec::Baseline(b)))
            .collect()
    }

    pub fn key(&self) -> &'static str {
        match self {
            ModelSpec::Network(v) => v.key(),
            ModelSpec::Baseline(b) => b.key(),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Self::all()
            .into_iter()
            .find(|m| m.key() == s)
            .ok_or_else(|| {
                let keys: Vec<&str> = Self::all().iter().map(ModelSpec::key).collect();
                Error::Config(format!("unknown model `{s}` (expected one of {})", keys.join(", ")))
            })
    }
}

/// Settings shared by every cell.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub synth: SynthConfig,
    pub pipeline: PipelineConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    /// L2 strength of the regression baselines.
    pub l2: f64,
    pub dlinear_window: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            synth: SynthConfig::default(),
            pipeline: PipelineConfig::default(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            l2: 1.0,
            dlinear_window: DLinear::DEFAULT_WINDOW,
        }
    }
}

/// Outcome of fitting one model on one prepared split.
#[derive(Clone, Debug)]
pub struct FitOutcome {
    pub test: MetricsReport,
    pub history: Option<TrainHistory>,
    pub network: Option<SeizureFormer>,
}

/// Fits `spec` on the train/validation blocks and scores the test block.
/// `seed` drives initialization and shuffling.
pub fn fit_and_evaluate(prepared: &Prepared, spec: ModelSpec, cfg: &ExperimentConfig, seed: u64) -> Result<FitOutcome> {
    let splits = &prepared.splits;
    if splits.test.is_empty() {
        return Err(Error::Degenerate("empty test split".into()));
    }
    let train_cfg = TrainConfig { seed, ..cfg.train.clone() };
    match spec {
        ModelSpec::Network(variant) => {
            let model_cfg = ModelConfig { lookback: cfg.pipeline.lookback, ..cfg.model.clone() }.with_variant(variant);
            let mut model = SeizureFormer::new(model_cfg, seed)?;
            let history = train_loop(&mut model, splits, &train_cfg)?;
            Ok(FitOutcome { test: evaluate(&model, &splits.test)?, history: Some(history), network: Some(model) })
        }
        ModelSpec::Baseline(BaselineKind::DLinear) => {
            let channels = splits.train.first().map_or(2, |s| s.channels);
            let mut model = DLinear::new(cfg.pipeline.lookback, channels, cfg.dlinear_window)?;
            let history = train_loop(&mut model, splits, &train_cfg)?;
            Ok(FitOutcome { test: evaluate(&model, &splits.test)?, history: Some(history), network: None })
        }
        ModelSpec::Baseline(kind) => {
            let fit = if kind == BaselineKind::Logistic {
                logistic_fit(&splits.train, cfg.l2)?
            } else {
                poisson_fit(&splits.train, cfg.l2)?
            };
            let scores = fit.predict(&splits.test);
            let test = MetricsReport::compute(scores, splits.test.iter().map(|s| s.y).collect())?;
            Ok(FitOutcome { test, history: None, network: None })
        }
    }
}

/// One (model, patient, horizon) entry of a results table; `None` metrics
/// mark a cell that could not be evaluated.
#[derive(Clone, Debug, PartialEq)]
pub struct Cell {
    pub model: ModelSpec,
    pub seed: u64,
    pub horizon: usize,
    pub metrics: Option<(f64, f64)>,
    pub failure: Option<String>,
}

/// Synthesizes the patient for `seed` and runs `spec` at `horizon`.
pub fn run_cell(spec: ModelSpec, seed: u64, horizon: usize, cfg: &ExperimentConfig) -> Cell {
    let result = generate_patient(&SynthConfig { seed, ..cfg.synth.clone() })
        .and_then(|series| run_on_series(&series, spec, horizon, cfg, seed));
    match result {
        Ok(r) => Cell { model: spec, seed, horizon, metrics: Some((r.roc_auc, r.pr_auc)), failure: None },
        Err(e) => Cell { model: spec, seed, horizon, metrics: None, failure: Some(e.to_string()) },
    }
}

fn run_on_series(series: &PatientSeries, spec: ModelSpec, horizon: usize, cfg: &ExperimentConfig, seed: u64) -> Result<MetricsReport> {
    let prepared = prepare(series, &cfg.pipeline, horizon)?;
    Ok(fit_and_evaluate(&prepared, spec, cfg, seed)?.test)
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchmarkTable {
    /// Ordered model-major, then seed, then horizon.
    pub cells: Vec<Cell>,
}

impl BenchmarkTable {
    /// Runs every cell; cells execute in parallel but the table order is
    /// fixed by the inputs.
    pub fn run(models: &[ModelSpec], seeds: &[u64], horizons: &[usize], cfg: &ExperimentConfig) -> Result<Self> {
        if seeds.is_empty() || horizons.is_empty() || models.is_empty() {
            return Err(Error::InvalidArgument("benchmark needs at least one model, seed and horizon".into()));
        }
        let jobs: Vec<(ModelSpec, u64, usize)> = models
            .iter()
            .flat_map(|&m| seeds.iter().flat_map(move |&s| horizons.iter().map(move |&h| (m, s, h))))
            .collect();
        let cells = jobs.par_iter().map(|&(m, s, h)| run_cell(m, s, h, cfg)).collect();
        Ok(Self { cells })
    }

    /// Mean `(roc_auc, pr_auc)` over evaluated cells of `model`, optionally
    /// restricted to one horizon. `None` if every cell failed.
    pub fn mean(&self, model: ModelSpec, horizon: Option<usize>) -> Option<(f64, f64)> {
        let values: Vec<(f64, f64)> = self
            .cells
            .iter()
            .filter(|c| c.model == model && horizon.is_none_or(|h| c.horizon == h))
            .filter_map(|c| c.metrics)
            .collect();
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        Some((values.iter().map(|v| v.0).sum::<f64>() / n, values.iter().map(|v| v.1).sum::<f64>() / n))
    }

    /// `model,seed,horizon,roc_auc,pr_auc` rows, then per-model means for
    /// each horizon and overall (`seed` = `mean`, `horizon` = `all`).
    pub fn to_csv(&self) -> String {
        let fmt = |m: Option<(f64, f64)>| match m {
            Some((r, p)) => format!("{r:.6},{p:.6}"),
            None => "NA,NA".to_string(),
        };
        let mut out = String::from("model,seed,horizon,roc_auc,pr_auc\n");
        for c in &self.cells {
            writeln!(out, "{},{},{},{}", c.model.key(), c.seed, c.horizon, fmt(c.metrics)).unwrap();
        }
        let mut models: Vec<ModelSpec> = Vec::new();
        let mut horizons: Vec<usize> = Vec::new();
        for c in &self.cells {
            if !models.contains(&c.model) {
                models.push(c.model);
            }
            if !horizons.contains(&c.horizon) {
                horizons.push(c.horizon);
            }
        }
        for m in models {
            for &h in &horizons {
                writeln!(out, "{},mean,{h},{}", m.key(), fmt(self.mean(m, Some(h)))).unwrap();
            }
            writeln!(out, "{},mean,all,{}", m.key(), fmt(self.mean(m, None))).unwrap();
        }
        out
    }

    pub fn failures(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.metrics.is_none())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fast() -> ExperimentConfig {
        ExperimentConfig {
            synth: SynthConfig { days: 240, ..Default::default() },
            train: TrainConfig { max_epochs: 2, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn spec_keys_parse() {
        for m in ModelSpec::all() {
            assert_eq!(ModelSpec::parse(m.key()).unwrap(), m);
        }
        assert!(ModelSpec::parse("svm").is_err());
    }

    #[test]
    fn table_counts_means_and_na() {
        let models = [ModelSpec::Baseline(BaselineKind::Logistic), ModelSpec::Network(Variant::NoAll)];
        let t = BenchmarkTable::run(&models, &[1, 2], &[1, 3], &fast()).unwrap();
        assert_eq!(t.cells.len(), 8);
        let csv = t.to_csv();
        assert_eq!(csv.lines().count(), 1 + 8 + 2 * 3);
        let logistic: Vec<&Cell> = t.cells.iter().filter(|c| c.model == models[0] && c.horizon == 1).collect();
        let (r, p): (Vec<f64>, Vec<f64>) = logistic.iter().filter_map(|c| c.metrics).unzip();
        let mean = t.mean(models[0], Some(1)).unwrap();
        assert_eq!(mean.0, r.iter().sum::<f64>() / r.len() as f64);
        assert_eq!(mean.1, p.iter().sum::<f64>() / p.len() as f64);
        assert_eq!(BenchmarkTable::run(&models, &[1, 2], &[1, 3], &fast()).unwrap().to_csv(), csv);

        let na = run_cell(models[0], 1, 1, &ExperimentConfig { synth: SynthConfig { days: 100, ..Default::default() }, ..fast() });
        assert!(na.metrics.is_none() && na.failure.is_some());
        let table = BenchmarkTable { cells: vec![na] };
        assert!(table.to_csv().contains("logistic,1,1,NA,NA\n"));
        assert!(table.to_csv().ends_with("logistic,mean,all,NA,NA\n"));
    }
}
