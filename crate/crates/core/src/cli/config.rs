use crate::data::{HorizonRule, DEFAULT_HORIZONS};
use crate::error::{Error, Result};
use crate::experiment::ExperimentConfig;
use crate::model::parse_value;
use chrono::NaiveDate;
use std::path::Path;

/// Every tunable setting of a run: model, training, pipeline, baselines and
/// the synthetic generator (whose seed comes from the command line).
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: ExperimentConfig,
    /// Horizons `train` and `eval` accept and `benchmark` runs by default.
    pub horizons: Vec<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self { experiment: ExperimentConfig::default(), horizons: DEFAULT_HORIZONS.to_vec() }
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

pub(crate) fn parse_list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value.split(',').map(|v| parse_value(key, v.trim())).collect()
}

impl RunConfig {
    /// Reads a `key=value` file. Blank lines and `#` comments are skipped.
    /// Run manifests are accepted too: `config.` prefixes are stripped and
    /// `run.` / `metric.` entries ignored.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text)?;
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1)))?;
            let key = key.trim();
            if key.starts_with("run.") || key.starts_with("metric.") {
                continue;
            }
            let key = key.strip_prefix("config.").unwrap_or(key);
            self.set(key, value.trim()).map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, assignment: &str) -> Result<()> {
        let (key, value) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{assignment}` is not key=value")))?;
        self.set(key.trim(), value.trim())
    }

    /// Sets one key; unknown keys are an error.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let e = &mut self.experiment;
        if key == "lookback" {
            e.model.set(key, value)?;
            e.pipeline.lookback = e.model.lookback;
            return Ok(());
        }
        if e.model.set(key, value)? || e.train.set(key, value)? {
            return Ok(());
        }
        let s = &mut e.synth;
        match key {
            "rolling_window" => e.pipeline.labels.rolling_window = parse_value(key, value)?,
            "threshold_fraction" => e.pipeline.labels.threshold_fraction = parse_value(key, value)?,
            "min_history" => e.pipeline.labels.min_history = parse_value(key, value)?,
            "horizon_rule" => e.pipeline.horizon_rule = HorizonRule::parse(value)?,
            "horizons" => self.horizons = parse_list(key, value)?,
            "l2" => e.l2 = parse_value(key, value)?,
            "dlinear_window" => e.dlinear_window = parse_value(key, value)?,
            "days" => s.days = parse_value(key, value)?,
            "base_rate" => s.base_rate = parse_value(key, value)?,
            "weekly_amplitude" => s.weekly_amplitude = parse_value(key, value)?,
            "multiweek_period" => s.multiweek_period = parse_value(key, value)?,
            "multiweek_amplitude" => s.multiweek_amplitude = parse_value(key, value)?,
            "noise_scale" => s.noise_scale = parse_value(key, value)?,
            "le_gain" => s.le_gain = parse_value(key, value)?,
            "channel_correlation" => s.channel_correlation = parse_value(key, value)?,
            "start_date" => {
                s.start_date = NaiveDate::parse_from_str(value, "%Y-%m-%d")
                    .map_err(|_| Error::Config(format!("start_date: `{value}` is not YYYY-MM-DD")))?
            }
            _ => return Err(Error::Config(format!("unknown config key `{key}`"))),
        }
        Ok(())
    }

    /// Every key with its current value, in a stable order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let e = &self.experiment;
        let s = &e.synth;
        let mut pairs = e.model.to_pairs();
        pairs.extend(e.train.to_pairs());
        pairs.extend([
            ("rolling_window", e.pipeline.labels.rolling_window.to_string()),
            ("threshold_fraction", e.pipeline.labels.threshold_fraction.to_string()),
            ("min_history", e.pipeline.labels.min_history.to_string()),
            ("horizon_rule", e.pipeline.horizon_rule.as_str().to_string()),
            ("horizons", join(&self.horizons)),
            ("l2", e.l2.to_string()),
            ("dlinear_window", e.dlinear_window.to_string()),
            ("days", s.days.to_string()),
            ("base_rate", s.base_rate.to_string()),
            ("weekly_amplitude", s.weekly_amplitude.to_string()),
            ("multiweek_period", s.multiweek_period.to_string()),
            ("multiweek_amplitude", s.multiweek_amplitude.to_string()),
            ("noise_scale", s.noise_scale.to_string()),
            ("le_gain", s.le_gain.to_string()),
            ("channel_correlation", s.channel_correlation.to_string()),
            ("start_date", s.start_date.format("%Y-%m-%d").to_string()),
        ]);
        pairs
    }

    /// Renders a file that [`RunConfig::load`] reads back to `self`.
    pub fn render(&self) -> String {
        self.to_pairs().into_iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        self.experiment.model.validate()?;
        self.experiment.train.validate()?;
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::Config("horizons must be a non-empty list of positive integers".into()));
        }
        Ok(())
    }

    pub fn check_horizon(&self, horizon: usize) -> Result<()> {
        if self.horizons.contains(&horizon) {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("horizon {horizon} is not allowed (allowed: {})", join(&self.horizons))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_round_trips() {
        let mut cfg = RunConfig::default();
        for kv in ["embed_dim=8", "lookback=20", "horizons=1,3", "noise_scale=0.3", "optimizer=sgd", "use_se=false"] {
            cfg.apply_override(kv).unwrap();
        }
        assert_eq!(cfg.experiment.pipeline.lookback, 20);
        let mut back = RunConfig::default();
        back.apply_text(&cfg.render()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn comments_manifests_and_unknown_keys() {
        let mut cfg = RunConfig::default();
        cfg.apply_text("# header\n\nheads = 4 # inline\nconfig.patience=9\nrun.command=train\nmetric.test_roc_auc=0.5\n")
            .unwrap();
        assert_eq!(cfg.experiment.model.heads, 4);
        assert_eq!(cfg.experiment.train.patience, 9);
        let err = cfg.apply_text("a=1\nbogus=3\n").unwrap_err();
        assert!(matches!(err, Error::Config(_)));
        assert!(err.to_string().contains("line 1"));
        assert!(cfg.apply_text("no_equals_sign").is_err());
        assert!(cfg.apply_override("seed=x").is_err());
    }

    #[test]
    fn horizon_gate_lists_allowed() {
        let cfg = RunConfig::default();
        cfg.check_horizon(7).unwrap();
        let msg = cfg.check_horizon(5).unwrap_err().to_string();
        assert!(msg.contains("1,3,7,14"), "{msg}");
    }
}
