//! Daily biomarker ingestion, per-patient normalization, dynamic risk
//! labeling and lookback/horizon window construction.

mod labels;
mod normalize;
mod records;
mod windows;

pub use labels::{label_days, LabelConfig, RiskLabels};
pub use normalize::{zscore_normalize, NormalizedSeries};
pub use records::{parse_csv, parse_csv_str, DailyRecord, ParseReport, PatientSeries, CSV_HEADER};
pub use windows::{
    compute_pos_weight, make_windows, samples_to_csv, split_chronological, HorizonRule, Splits, WindowSample,
    DEFAULT_HORIZONS,
};

use crate::error::Result;

/// Lookback, horizon and labeling settings shared by every model.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub lookback: usize,
    pub labels: LabelConfig,
    pub horizon_rule: HorizonRule,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self { lookback: 30, labels: LabelConfig::default(), horizon_rule: HorizonRule::AnyHighRiskDay }
    }
}

/// Output of [`prepare`]: everything downstream of the raw series.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub normalized: NormalizedSeries,
    pub labels: RiskLabels,
    pub splits: Splits,
}

/// normalize -> label -> window -> split.
pub fn prepare(series: &PatientSeries, cfg: &PipelineConfig, horizon: usize) -> Result<Prepared> {
    let labels = label_days(series, cfg.labels)?;
    let normalized = zscore_normalize(series);
    let samples = make_windows(&normalized, &labels, cfg.lookback, horizon, cfg.horizon_rule)?;
    let splits = split_chronological(&samples)?;
    Ok(Prepared { normalized, labels, splits })
}
