//! Walks the preprocessing chain on one synthetic patient: dynamic labels,
//! z-scores, lookback windows per horizon and the chronological split.

use seizureformer::data::{
    compute_pos_weight, label_days, make_windows, split_chronological, zscore_normalize, HorizonRule, LabelConfig,
};
use seizureformer::synth::{generate_patient, SynthConfig};

fn main() -> seizureformer::Result<()> {
    let series = generate_patient(&SynthConfig { seed: 7, ..Default::default() })?;
    let labels = label_days(&series, LabelConfig::default())?;
    println!(
        "{} days, {} labeled, {} high risk (prevalence {:.3})",
        series.len(),
        labels.labeled_days(),
        labels.high_risk_days(),
        labels.prevalence()
    );
    println!("day   date        le  threshold  high_risk");
    for t in 58..66 {
        let threshold = labels.thresholds[t].map_or("-".to_string(), |v| format!("{v:.3}"));
        let label = labels.labels[t].map_or("-", |l| if l { "yes" } else { "no" });
        println!("{t:<5} {}  {:>2}  {threshold:>9}  {label}", labels.dates[t], labels.le_counts[t]);
    }

    let normalized = zscore_normalize(&series);
    println!("\nchannel means {:.2?}, sds {:.2?}", normalized.mu, normalized.sigma);
    println!("\nhorizon  rule        samples  train(+/-)  val(+/-)  test(+/-)  pos_weight");
    for rule in [HorizonRule::AnyHighRiskDay, HorizonRule::Cumulative] {
        for h in [1, 3, 7, 14] {
            let samples = make_windows(&normalized, &labels, 30, h, rule)?;
            let splits = split_chronological(&samples)?;
            let [tr, va, te] = splits.class_counts();
            let train_y: Vec<bool> = splits.train.iter().map(|s| s.y).collect();
            let pw = compute_pos_weight(&train_y).map_or("NA".to_string(), |w| format!("{w:.3}"));
            println!(
                "{h:<8} {:<11} {:>7}  {:>4}/{:<4}  {:>3}/{:<4}  {:>3}/{:<4}  {pw}",
                rule.as_str(),
                samples.len(),
                tr.0,
                tr.1,
                va.0,
                va.1,
                te.0,
                te.1
            );
        }
    }
    Ok(())
}
