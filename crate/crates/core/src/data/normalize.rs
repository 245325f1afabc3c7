use super::PatientSeries;
use chrono::NaiveDate;

/// Per-patient z-scored A+B channels. `z[c][t] = (x[c][t] - mu[c]) / sigma[c]`
/// with population statistics over the whole series.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedSeries {
    pub patient_id: String,
    pub dates: Vec<NaiveDate>,
    /// Channel-major z-scores.
    pub z: Vec<Vec<f64>>,
    pub mu: Vec<f64>,
    pub sigma: Vec<f64>,
    /// Channels with zero variance; their z-scores are all zero.
    pub degenerate_channels: Vec<usize>,
}

impl NormalizedSeries {
    pub fn channels(&self) -> usize {
        self.z.len()
    }

    pub fn len(&self) -> usize {
        self.dates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dates.is_empty()
    }

    /// Inverse transform back to counts.
    pub fn denormalize(&self, channel: usize, t: usize) -> f64 {
        self.z[channel][t] * self.sigma[channel] + self.mu[channel]
    }
}

/// Z-scores both A+B channels independently. A flat channel (sigma = 0) maps
/// to zeros and is listed in `degenerate_channels`.
pub fn zscore_normalize(series: &PatientSeries) -> NormalizedSeries {
    assert!(!series.is_empty(), "cannot normalize an empty series");
    let n = series.len() as f64;
    let mut z = Vec::with_capacity(2);
    let mut mu = Vec::with_capacity(2);
    let mut sigma = Vec::with_capacity(2);
    let mut degenerate_channels = Vec::new();
    for c in 0..2 {
        let x: Vec<f64> = series.records.iter().map(|r| f64::from(r.ab(c))).collect();
        let m = x.iter().sum::<f64>() / n;
        let s = (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        if s > 0.0 {
            z.push(x.iter().map(|v| (v - m) / s).collect());
        } else {
            degenerate_channels.push(c);
            z.push(vec![0.0; x.len()]);
        }
        mu.push(m);
        sigma.push(s);
    }
    NormalizedSeries {
        patient_id: series.patient_id.clone(),
        dates: series.dates(),
        z,
        mu,
        sigma,
        degenerate_channels,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::DailyRecord;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn series(ch1: &[u32], ch2: &[u32]) -> PatientSeries {
        let start = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap();
        let records = ch1
            .iter()
            .zip(ch2)
            .enumerate()
            .map(|(i, (&a, &b))| DailyRecord {
                date: start + chrono::Days::new(i as u64),
                ab_ch1: a,
                ab_ch2: b,
                le_count: 0,
            })
            .collect();
        PatientSeries { patient_id: "p".into(), records }
    }

    #[test]
    fn hand_example_population_sigma() {
        let n = zscore_normalize(&series(&[1, 2, 3], &[5, 5, 5]));
        assert_abs_diff_eq!(n.mu[0], 2.0);
        assert_abs_diff_eq!(n.sigma[0], (2.0f64 / 3.0).sqrt(), epsilon = 1e-15);
        assert_abs_diff_eq!(n.z[0][0], -1.224744871391589, epsilon = 1e-12);
        assert_abs_diff_eq!(n.z[0][1], 0.0);
        assert_abs_diff_eq!(n.z[0][2], 1.224744871391589, epsilon = 1e-12);
        assert_eq!(n.z[1], vec![0.0; 3]);
        assert_eq!(n.degenerate_channels, vec![1]);
    }

    proptest! {
        #[test]
        fn standardized_and_invertible(v in prop::collection::vec((0u32..500, 0u32..500), 2..200)) {
            let (a, b): (Vec<u32>, Vec<u32>) = v.into_iter().unzip();
            let s = series(&a, &b);
            let n = zscore_normalize(&s);
            for c in 0..2 {
                let raw: Vec<f64> = s.records.iter().map(|r| f64::from(r.ab(c))).collect();
                if n.sigma[c] > 0.0 {
                    let len = raw.len() as f64;
                    let mean = n.z[c].iter().sum::<f64>() / len;
                    let sd = (n.z[c].iter().map(|z| (z - mean).powi(2)).sum::<f64>() / len).sqrt();
                    prop_assert!(mean.abs() < 1e-9);
                    prop_assert!((sd - 1.0).abs() < 1e-9);
                }
                for (t, x) in raw.iter().enumerate() {
                    prop_assert!((n.denormalize(c, t) - x).abs() < 1e-9);
                }
            }
        }
    }
}
