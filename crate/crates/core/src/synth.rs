//! Seeded synthetic patients with planted weekly and multi-week risk cycles.
//!
//! Per day `t`:
//!
//! ```text
//! z_t = weekly_amplitude * sin(2πt/7 + φ_w)
//!     + multiweek_amplitude * sin(2πt/multiweek_period + φ_m)
//!     + a_t                       a_t = 0.8 a_{t-1} + noise_scale * N(0,1)
//! r_t = clamp01(2 * sigmoid(z_t) - 1)
//! ```
//!
//! A+B counts scatter around `base_rate * (1 + r_t)`, with channel 2 sharing
//! a `channel_correlation` fraction of channel 1's noise; LE counts are
//! Poisson with rate `le_gain * r_t`. Risk is zero through the negative half
//! of the cycles, so with no noise and no amplitude every count is constant
//! and there are no long episodes.

use crate::data::{DailyRecord, PatientSeries};
use crate::error::{Error, Result};
use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use std::collections::HashSet;
use std::f64::consts::PI;

const AR_COEFFICIENT: f64 = 0.8;
const MIN_DAYS: usize = 120;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub days: usize,
    /// Mean A+B detections/day at zero risk.
    pub base_rate: f64,
    pub weekly_amplitude: f64,
    pub multiweek_period: f64,
    pub multiweek_amplitude: f64,
    pub noise_scale: f64,
    /// LE rate at full risk.
    pub le_gain: f64,
    pub channel_correlation: f64,
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            days: 1000,
            base_rate: 40.0,
            weekly_amplitude: 1.5,
            multiweek_period: 28.0,
            multiweek_amplitude: 1.5,
            noise_scale: 0.6,
            le_gain: 8.0,
            channel_correlation: 0.5,
            start_date: NaiveDate::from_ymd_opt(2015, 1, 1).unwrap(),
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.days < MIN_DAYS {
            return bad(format!("synthetic series need at least {MIN_DAYS} days, got {}", self.days));
        }
        let non_negative = [
            ("base_rate", self.base_rate),
            ("weekly_amplitude", self.weekly_amplitude),
            ("multiweek_amplitude", self.multiweek_amplitude),
            ("noise_scale", self.noise_scale),
            ("le_gain", self.le_gain),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if !(self.multiweek_period > 0.0) {
            return bad(format!("multiweek_period must be positive, got {}", self.multiweek_period));
        }
        if !(0.0..=1.0).contains(&self.channel_correlation) {
            return bad(format!("channel_correlation must lie in [0, 1], got {}", self.channel_correlation));
        }
        Ok(())
    }
}

/// Latent daily risk in `[0, 1]` for `cfg`, using the same random stream as
/// [`generate_patient`].
pub fn latent_risk(cfg: &SynthConfig) -> Result<Vec<f64>> {
    Ok(simulate(cfg)?.0)
}

pub fn generate_patient(cfg: &SynthConfig) -> Result<PatientSeries> {
    let (_, records) = simulate(cfg)?;
    Ok(PatientSeries { patient_id: format!("synth-{}", cfg.seed), records })
}

/// One patient per seed, ids `synth-<seed>`, other settings from `template`.
pub fn generate_cohort(seeds: &[u64], template: &SynthConfig) -> Result<Vec<PatientSeries>> {
    if seeds.is_empty() {
        return Err(Error::InvalidArgument("cohort needs at least one seed".into()));
    }
    let mut seen = HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(Error::InvalidArgument(format!("duplicate seed {dup}")));
    }
    seeds
        .iter()
        .map(|&seed| generate_patient(&SynthConfig { seed, ..template.clone() }))
        .collect()
}

fn simulate(cfg: &SynthConfig) -> Result<(Vec<f64>, Vec<DailyRecord>)> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let weekly_phase = rng.gen_range(0.0..2.0 * PI);
    let multiweek_phase = rng.gen_range(0.0..2.0 * PI);
    let stationary_sd = cfg.noise_scale / (1.0 - AR_COEFFICIENT * AR_COEFFICIENT).sqrt();
    let mut ar = stationary_sd * normal(&mut rng);

    let mut risk = Vec::with_capacity(cfg.days);
    let mut records = Vec::with_capacity(cfg.days);
    for t in 0..cfg.days {
        if t > 0 {
            ar = AR_COEFFICIENT * ar + cfg.noise_scale * normal(&mut rng);
        }
        let tf = t as f64;
        let z = cfg.weekly_amplitude * (2.0 * PI * tf / 7.0 + weekly_phase).sin()
            + cfg.multiweek_amplitude * (2.0 * PI * tf / cfg.multiweek_period + multiweek_phase).sin()
            + ar;
        let r = (2.0 / (1.0 + (-z).exp()) - 1.0).clamp(0.0, 1.0);

        let mean = cfg.base_rate * (1.0 + r);
        let spread = cfg.noise_scale * mean.sqrt();
        let e1 = normal(&mut rng);
        let e2 = cfg.channel_correlation * e1
            + (1.0 - cfg.channel_correlation * cfg.channel_correlation).sqrt() * normal(&mut rng);
        let count = |e: f64| (mean + spread * e).max(0.0).round() as u32;
        let le_count = poisson(cfg.le_gain * r, rng.gen::<f64>());

        risk.push(r);
        records.push(DailyRecord {
            date: cfg.start_date + chrono::Days::new(t as u64),
            ab_ch1: count(e1),
            ab_ch2: count(e2),
            le_count,
        });
    }
    Ok((risk, records))
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Inverse-CDF Poisson draw for a uniform `u` in `[0, 1)`.
fn poisson(rate: f64, u: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let mut k = 0u32;
    let mut p = (-rate).exp();
    let mut cdf = p;
    while u > cdf && k < 10_000 {
        k += 1;
        p *= rate / f64::from(k);
        cdf += p;
        if p == 0.0 && cdf < u {
            break;
        }
    }
    k
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{label_days, LabelConfig};

    fn autocorrelation(x: &[f64], lag: usize) -> f64 {
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let var: f64 = x.iter().map(|v| (v - m).powi(2)).sum();
        let cov: f64 = x.iter().zip(&x[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
        cov / var
    }

    #[test]
    fn degenerate_config_gives_constant_unlabeled_risk() {
        let cfg = SynthConfig {
            noise_scale: 0.0,
            weekly_amplitude: 0.0,
            multiweek_amplitude: 0.0,
            ..Default::default()
        };
        let s = generate_patient(&cfg).unwrap();
        let first = s.records[0];
        assert!(s.records.iter().all(|r| (r.ab_ch1, r.ab_ch2, r.le_count) == (first.ab_ch1, first.ab_ch2, first.le_count)));
        let labels = label_days(&s, LabelConfig::default()).unwrap();
        assert_eq!(labels.high_risk_days(), 0);
    }

    #[test]
    fn seed_determinism() {
        let cfg = SynthConfig { seed: 42, ..Default::default() };
        assert_eq!(generate_patient(&cfg).unwrap(), generate_patient(&cfg).unwrap());
        let other = SynthConfig { seed: 43, ..Default::default() };
        assert_ne!(generate_patient(&cfg).unwrap(), generate_patient(&other).unwrap());
    }

    #[test]
    fn weekly_cycle_shows_in_le_autocorrelation() {
        for seed in 0..5 {
            let cfg = SynthConfig { seed, ..Default::default() };
            let le: Vec<f64> = generate_patient(&cfg).unwrap().records.iter().map(|r| f64::from(r.le_count)).collect();
            let (lag7, lag3) = (autocorrelation(&le, 7), autocorrelation(&le, 3));
            assert!(lag7 > lag3, "seed {seed}: lag7 {lag7} vs lag3 {lag3}");
        }
    }

    #[test]
    fn cohort_ids_and_duplicates() {
        let c = generate_cohort(&[1, 2, 3, 4, 5], &SynthConfig::default()).unwrap();
        assert_eq!(c.len(), 5);
        assert_eq!(c[2].patient_id, "synth-3");
        for i in 0..5 {
            for j in i + 1..5 {
                assert_ne!(c[i].records, c[j].records);
            }
        }
        assert!(generate_cohort(&[1, 1], &SynthConfig::default()).is_err());
        assert!(generate_cohort(&[], &SynthConfig::default()).is_err());
        let again = generate_cohort(&[1, 2, 3, 4, 5], &SynthConfig::default()).unwrap();
        let bytes = |c: &[PatientSeries]| c.iter().map(PatientSeries::to_csv).collect::<String>();
        assert_eq!(bytes(&c), bytes(&again));
    }

    #[test]
    fn invalid_configs() {
        assert!(SynthConfig { days: 119, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { le_gain: -1.0, ..Default::default() }.validate().is_err());
        assert!(SynthConfig { channel_correlation: 1.5, ..Default::default() }.validate().is_err());
    }

    #[test]
    fn poisson_inverse_cdf() {
        assert_eq!(poisson(0.0, 0.99), 0);
        assert_eq!(poisson(2.0, 0.0), 0);
        let mean: f64 = (0..10_000).map(|i| f64::from(poisson(3.0, (i as f64 + 0.5) / 10_000.0))).sum::<f64>() / 10_000.0;
        assert!((mean - 3.0).abs() < 0.01, "{mean}");
    }
}
