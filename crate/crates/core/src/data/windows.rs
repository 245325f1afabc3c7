use super::{NormalizedSeries, RiskLabels};
use crate::error::{Error, Result};
use chrono::NaiveDate;
use std::fmt::Write as _;

/// Prediction horizons evaluated by default.
pub const DEFAULT_HORIZONS: [usize; 4] = [1, 3, 7, 14];

/// How per-day labels inside the horizon become one window label.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum HorizonRule {
    /// High risk if any horizon day is high risk.
    #[default]
    AnyHighRiskDay,
    /// High risk if the summed LE count exceeds the summed daily thresholds.
    Cumulative,
}

impl HorizonRule {
    pub fn as_str(&self) -> &'static str {
        match self {
            HorizonRule::AnyHighRiskDay => "any",
            HorizonRule::Cumulative => "cumulative",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "any" => Ok(HorizonRule::AnyHighRiskDay),
            "cumulative" => Ok(HorizonRule::Cumulative),
            _ => Err(Error::Config(format!("unknown horizon rule `{s}` (expected any|cumulative)"))),
        }
    }
}

/// A lookback window and the label of the days that follow it.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    /// Row-major `lookback x channels` z-scores, oldest day first.
    pub x: Vec<f64>,
    pub lookback: usize,
    pub channels: usize,
    pub y: bool,
    pub horizon: usize,
    /// Last day of the lookback.
    pub anchor_date: NaiveDate,
    /// Total LE count over the horizon days.
    pub horizon_le: u32,
}

impl WindowSample {
    pub fn value(&self, day: usize, channel: usize) -> f64 {
        self.x[day * self.channels + channel]
    }

    pub fn horizon_end(&self) -> NaiveDate {
        self.anchor_date + chrono::Days::new(self.horizon as u64)
    }

    pub fn lookback_start(&self) -> NaiveDate {
        self.anchor_date - chrono::Days::new(self.lookback as u64 - 1)
    }
}

/// One sample per anchor day whose lookback `[t-n+1, t]` and horizon
/// `[t+1, t+h]` are gap-free and whose horizon days all carry labels.
pub fn make_windows(
    normalized: &NormalizedSeries,
    labels: &RiskLabels,
    lookback: usize,
    horizon: usize,
    rule: HorizonRule,
) -> Result<Vec<WindowSample>> {
    if lookback == 0 || horizon == 0 {
        return Err(Error::InvalidArgument("lookback and horizon must be positive".into()));
    }
    if normalized.dates != labels.dates {
        return Err(Error::InvalidArgument("normalized series and labels cover different days".into()));
    }
    let len = normalized.len();
    if len < lookback + horizon {
        return Err(Error::Degenerate(format!(
            "series of {len} days is shorter than lookback {lookback} + horizon {horizon}"
        )));
    }
    let channels = normalized.channels();
    let dates = &normalized.dates;
    let span = (lookback + horizon - 1) as i64;
    let mut out = Vec::new();
    for t in lookback - 1..len - horizon {
        let first = t + 1 - lookback;
        if (dates[t + horizon] - dates[first]).num_days() != span {
            continue;
        }
        let days = t + 1..=t + horizon;
        let Some(day_labels) = days.clone().map(|i| labels.labels[i]).collect::<Option<Vec<bool>>>() else {
            continue;
        };
        let horizon_le: u32 = days.clone().map(|i| labels.le_counts[i]).sum();
        let y = match rule {
            HorizonRule::AnyHighRiskDay => day_labels.iter().any(|&l| l),
            HorizonRule::Cumulative => {
                let limit: f64 = days.map(|i| labels.thresholds[i].unwrap_or(0.0)).sum();
                f64::from(horizon_le) > limit
            }
        };
        let mut x = Vec::with_capacity(lookback * channels);
        for day in first..=t {
            for c in 0..channels {
                x.push(normalized.z[c][day]);
            }
        }
        out.push(WindowSample { x, lookback, channels, y, horizon, anchor_date: dates[t], horizon_le });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct Splits {
    pub train: Vec<WindowSample>,
    pub val: Vec<WindowSample>,
    pub test: Vec<WindowSample>,
}

impl Splits {
    pub fn class_counts(&self) -> [(usize, usize); 3] {
        let count = |s: &[WindowSample]| {
            let pos = s.iter().filter(|w| w.y).count();
            (pos, s.len() - pos)
        };
        [count(&self.train), count(&self.val), count(&self.test)]
    }
}

/// Contiguous 70/10/20 blocks by sample count, in date order. Samples at
/// the end of the train and validation blocks whose horizon reaches the
/// first anchor day of the following block are dropped.
pub fn split_chronological(samples: &[WindowSample]) -> Result<Splits> {
    let n = samples.len();
    if n < 10 {
        return Err(Error::Degenerate(format!("need at least 10 samples to split, got {n}")));
    }
    if samples.windows(2).any(|w| w[0].anchor_date >= w[1].anchor_date) {
        return Err(Error::InvalidArgument("samples must be in increasing anchor-date order".into()));
    }
    let n_train = n * 7 / 10;
    let n_val = n / 10;
    let (train, rest) = samples.split_at(n_train);
    let (val, test) = rest.split_at(n_val);
    let trim = |block: &[WindowSample], next_start: NaiveDate| -> Vec<WindowSample> {
        block.iter().filter(|s| s.horizon_end() < next_start).cloned().collect()
    };
    Ok(Splits {
        train: trim(train, val[0].anchor_date),
        val: trim(val, test[0].anchor_date),
        test: test.to_vec(),
    })
}

/// Negative-to-positive ratio of the training labels.
pub fn compute_pos_weight(train_labels: &[bool]) -> Result<f64> {
    let pos = train_labels.iter().filter(|&&y| y).count();
    let neg = train_labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Degenerate(format!(
            "single-class training split ({pos} positives, {neg} negatives)"
        )));
    }
    Ok(neg as f64 / pos as f64)
}

/// `anchor_date,horizon,y` export, one row per sample.
pub fn samples_to_csv(samples: &[WindowSample]) -> String {
    let mut out = String::from("anchor_date,horizon,y\n");
    for s in samples {
        writeln!(out, "{},{},{}", s.anchor_date.format("%Y-%m-%d"), s.horizon, u8::from(s.y)).unwrap();
    }
    out
}
