use super::PatientSeries;
use crate::error::{Error, Result};
use chrono::NaiveDate;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabelConfig {
    /// Calendar days before `t` averaged for the threshold.
    pub rolling_window: usize,
    /// A day is high risk when its LE count strictly exceeds
    /// `threshold_fraction * rolling mean`.
    pub threshold_fraction: f64,
    /// Days with fewer prior records stay unlabeled. Until `rolling_window`
    /// days of history exist the mean runs over all available prior days.
    pub min_history: usize,
}

impl Default for LabelConfig {
    fn default() -> Self {
        Self { rolling_window: 60, threshold_fraction: 0.7, min_history: 7 }
    }
}

/// Per-day dynamic high-risk labels. Index-aligned with the source series.
#[derive(Clone, Debug, PartialEq)]
pub struct RiskLabels {
    pub dates: Vec<NaiveDate>,
    /// `None` during warm-up.
    pub labels: Vec<Option<bool>>,
    /// `threshold_fraction * rolling mean`, where defined.
    pub thresholds: Vec<Option<f64>>,
    pub le_counts: Vec<u32>,
    pub config: LabelConfig,
}

impl RiskLabels {
    pub fn labeled_days(&self) -> usize {
        self.labels.iter().flatten().count()
    }

    pub fn high_risk_days(&self) -> usize {
        self.labels.iter().filter(|l| **l == Some(true)).count()
    }

    /// Fraction of labeled days that are high risk.
    pub fn prevalence(&self) -> f64 {
        let n = self.labeled_days();
        if n == 0 {
            0.0
        } else {
            self.high_risk_days() as f64 / n as f64
        }
    }
}

/// Labels each day from LE counts of strictly earlier days only.
pub fn label_days(series: &PatientSeries, config: LabelConfig) -> Result<RiskLabels> {
    if series.is_empty() {
        return Err(Error::InvalidArgument("cannot label an empty series".into()));
    }
    if config.rolling_window == 0 {
        return Err(Error::InvalidArgument("rolling window must be at least one day".into()));
    }
    if !(config.threshold_fraction > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold fraction must be positive, got {}",
            config.threshold_fraction
        )));
    }
    let recs = &series.records;
    let mut prefix = vec![0u64; recs.len() + 1];
    for (i, r) in recs.iter().enumerate() {
        prefix[i + 1] = prefix[i] + u64::from(r.le_count);
    }

    let mut labels = Vec::with_capacity(recs.len());
    let mut thresholds = Vec::with_capacity(recs.len());
    let mut lo = 0;
    for (i, r) in recs.iter().enumerate() {
        let earliest = r.date - chrono::Days::new(config.rolling_window as u64);
        while lo < i && recs[lo].date < earliest {
            lo += 1;
        }
        let in_window = i - lo;
        if i < config.min_history || in_window == 0 {
            labels.push(None);
            thresholds.push(None);
            continue;
        }
        let mean = (prefix[i] - prefix[lo]) as f64 / in_window as f64;
        let threshold = config.threshold_fraction * mean;
        labels.push(Some(f64::from(r.le_count) > threshold));
        thresholds.push(Some(threshold));
    }
    Ok(RiskLabels {
        dates: series.dates(),
        labels,
        thresholds,
        le_counts: recs.iter().map(|r| r.le_count).collect(),
        config,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DailyRecord;

    fn series_from_le(le: &[u32]) -> PatientSeries {
        let start = NaiveDate::from_ymd_opt(2021, 3, 1).unwrap();
        let records = le
            .iter()
            .enumerate()
            .map(|(i, &l)| DailyRecord { date: start + chrono::Days::new(i as u64), ab_ch1: 1, ab_ch2: 1, le_count: l })
            .collect();
        PatientSeries { patient_id: "p".into(), records }
    }

    #[test]
    fn rule_application_and_tie() {
        let mut le = vec![10; 60];
        le.push(8);
        let l = label_days(&series_from_le(&le), LabelConfig::default()).unwrap();
        assert_eq!(l.labels[60], Some(true));
        assert!((l.thresholds[60].unwrap() - 7.0).abs() < 1e-12);

        let mut le = vec![10; 60];
        le.push(7);
        let l = label_days(&series_from_le(&le), LabelConfig::default()).unwrap();
        assert_eq!(l.labels[60], Some(false));
    }

    #[test]
    fn all_zero_history() {
        let mut le = vec![0; 20];
        le.push(1);
        le.push(0);
        let l = label_days(&series_from_le(&le), LabelConfig::default()).unwrap();
        assert_eq!(l.labels[20], Some(true));
        assert_eq!(l.labels[21], Some(false));
    }

    #[test]
    fn warm_up_and_window() {
        let l = label_days(&series_from_le(&[5; 100]), LabelConfig::default()).unwrap();
        assert!(l.labels[..7].iter().all(Option::is_none));
        // constant positive counts always exceed 70% of their own mean
        assert!(l.labels[7..].iter().all(|x| *x == Some(true)));

        // only the 60 most recent days count once enough history exists
        let mut le = vec![100; 10];
        le.extend(vec![1; 60]);
        le.push(1);
        let l = label_days(&series_from_le(&le), LabelConfig::default()).unwrap();
        assert_eq!(l.labels[70], Some(true));
        assert!(l.thresholds[70].unwrap() < 1.0);
    }

    #[test]
    fn empty_and_invalid() {
        let empty = PatientSeries { patient_id: "p".into(), records: vec![] };
        assert!(label_days(&empty, LabelConfig::default()).is_err());
        let cfg = LabelConfig { threshold_fraction: 0.0, ..Default::default() };
        assert!(label_days(&series_from_le(&[1, 2]), cfg).is_err());
    }

    #[test]
    fn future_mutations_do_not_change_past_labels() {
        let le: Vec<u32> = (0..200).map(|i| (i * 7 % 13) as u32).collect();
        let base = label_days(&series_from_le(&le), LabelConfig::default()).unwrap();
        for cut in [10, 60, 150] {
            let mut mutated = le.clone();
            for v in &mut mutated[cut..] {
                *v = v.wrapping_mul(3) + 17;
            }
            let m = label_days(&series_from_le(&mutated), LabelConfig::default()).unwrap();
            assert_eq!(base.labels[..cut], m.labels[..cut]);
        }
    }
}
