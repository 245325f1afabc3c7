//! ROC AUC and PR AUC on small hand-made score sets, including ties and
//! a perfectly inverted ranking.

use seizureformer::metrics::{pr_auc, roc_auc};

fn main() -> seizureformer::Result<()> {
    let cases: [(&str, Vec<f64>, Vec<bool>); 4] = [
        ("perfect", vec![0.1, 0.2, 0.8, 0.9], vec![false, false, true, true]),
        ("inverted", vec![0.9, 0.8, 0.2, 0.1], vec![false, false, true, true]),
        ("all tied", vec![0.5; 4], vec![false, true, false, true]),
        ("mixed", vec![0.1, 0.4, 0.35, 0.8, 0.7, 0.2], vec![false, false, true, true, false, true]),
    ];
    println!("{:<10} {:>8} {:>8}", "scores", "ROC AUC", "PR AUC");
    for (name, scores, labels) in &cases {
        println!("{name:<10} {:>8.4} {:>8.4}", roc_auc(scores, labels)?, pr_auc(scores, labels)?);
    }
    match roc_auc(&[0.3, 0.7], &[true, true]) {
        Ok(v) => println!("single class gave {v}"),
        Err(e) => println!("single class: {e}"),
    }
    Ok(())
}
