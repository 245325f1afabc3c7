//! Generates a five-patient synthetic cohort and summarizes each series:
//! count levels, label prevalence and the weekly rhythm in LE counts.

use seizureformer::data::{label_days, LabelConfig};
use seizureformer::synth::{generate_cohort, SynthConfig};

fn autocorrelation(x: &[f64], lag: usize) -> f64 {
    let n = x.len();
    let mean = x.iter().sum::<f64>() / n as f64;
    let var: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let cov: f64 = (lag..n).map(|t| (x[t] - mean) * (x[t - lag] - mean)).sum();
    cov / var
}

fn main() -> seizureformer::Result<()> {
    let cohort = generate_cohort(&[0, 1, 2, 3, 4], &SynthConfig::default())?;
    println!("{:<8} {:>6} {:>9} {:>9} {:>8} {:>10} {:>7} {:>7}", "patient", "days", "ab_ch1", "ab_ch2", "le", "prevalence", "acf(3)", "acf(7)");
    for series in &cohort {
        let n = series.len() as f64;
        let mean = |f: &dyn Fn(usize) -> f64| (0..series.len()).map(f).sum::<f64>() / n;
        let le: Vec<f64> = series.records.iter().map(|r| f64::from(r.le_count)).collect();
        let labels = label_days(series, LabelConfig::default())?;
        println!(
            "{:<8} {:>6} {:>9.2} {:>9.2} {:>8.2} {:>10.3} {:>7.3} {:>7.3}",
            series.patient_id,
            series.len(),
            mean(&|t| f64::from(series.records[t].ab(0))),
            mean(&|t| f64::from(series.records[t].ab(1))),
            mean(&|t| le[t]),
            labels.prevalence(),
            autocorrelation(&le, 3),
            autocorrelation(&le, 7)
        );
    }
    println!("\nfirst rows of {}:", cohort[0].patient_id);
    for line in cohort[0].to_csv().lines().take(6) {
        println!("  {line}");
    }
    Ok(())
}
