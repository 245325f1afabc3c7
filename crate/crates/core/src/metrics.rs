//! Threshold-free ranking metrics for imbalanced binary labels.
//!
//! Both metrics group equal scores into a single threshold, so results do not
//! depend on input order.
//!
//! * ROC AUC is the Mann-Whitney statistic
//!   `(concordant pairs + 0.5 * tied pairs) / (n_pos * n_neg)`.
//! * PR AUC is average precision: the step-wise sum over thresholds of
//!   precision times the recall increment. No trapezoidal interpolation.

use crate::error::{Error, Result};
use std::cmp::Ordering;

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsReport {
    pub roc_auc: f64,
    pub pr_auc: f64,
    pub n_pos: usize,
    pub n_neg: usize,
    pub scores: Vec<f64>,
    pub labels: Vec<bool>,
}

impl MetricsReport {
    pub fn compute(scores: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        let roc_auc = roc_auc(&scores, &labels)?;
        let pr_auc = pr_auc(&scores, &labels)?;
        let n_pos = labels.iter().filter(|&&y| y).count();
        Ok(Self { roc_auc, pr_auc, n_pos, n_neg: labels.len() - n_pos, scores, labels })
    }
}

/// Area under the ROC curve; requires both classes.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let groups = threshold_groups(scores, labels)?;
    let n_pos: u64 = groups.iter().map(|g| g.pos).sum();
    let n_neg: u64 = groups.iter().map(|g| g.neg).sum();
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Degenerate(format!(
            "ROC AUC needs both classes (positives {n_pos}, negatives {n_neg})"
        )));
    }
    // Ascending score order; twice the statistic stays an exact integer.
    let mut neg_below = 0u64;
    let mut twice = 0u64;
    for g in groups.iter().rev() {
        twice += 2 * g.pos * neg_below + g.pos * g.neg;
        neg_below += g.neg;
    }
    Ok(twice as f64 / (2 * n_pos * n_neg) as f64)
}

/// Average precision; requires at least one positive.
pub fn pr_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let groups = threshold_groups(scores, labels)?;
    let n_pos: u64 = groups.iter().map(|g| g.pos).sum();
    if n_pos == 0 {
        return Err(Error::Degenerate("PR AUC needs at least one positive".into()));
    }
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut ap = 0.0;
    for g in &groups {
        tp += g.pos;
        fp += g.neg;
        if g.pos > 0 {
            ap += (g.pos as f64 / n_pos as f64) * (tp as f64 / (tp + fp) as f64);
        }
    }
    Ok(ap)
}

struct Group {
    pos: u64,
    neg: u64,
}

/// Class counts per distinct score, in descending score order.
fn threshold_groups(scores: &[f64], labels: &[bool]) -> Result<Vec<Group>> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores vs {} labels", scores.len(), labels.len())));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::NonFinite("NaN score".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap_or(Ordering::Equal));
    let mut groups: Vec<Group> = Vec::new();
    let mut last = None;
    for i in order {
        if last != Some(scores[i]) {
            groups.push(Group { pos: 0, neg: 0 });
            last = Some(scores[i]);
        }
        let g = groups.last_mut().unwrap();
        if labels[i] {
            g.pos += 1;
        } else {
            g.neg += 1;
        }
    }
    Ok(groups)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn roc_examples() {
        assert_eq!(roc_auc(&[0.9, 0.1], &[true, false]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.3; 6], &[true, false, true, false, false, true]).unwrap(), 0.5);
        assert!(matches!(roc_auc(&[0.1, 0.2], &[true, true]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn pr_examples() {
        let scores = [0.9, 0.5, 0.4, 0.3, 0.1];
        let labels = [true, false, false, false, false];
        assert_eq!(pr_auc(&scores, &labels).unwrap(), 1.0);
        assert_eq!(pr_auc(&scores, &[true; 5]).unwrap(), 1.0);
        assert!(matches!(pr_auc(&scores, &[false; 5]), Err(Error::Degenerate(_))));
    }

    #[test]
    fn duplicating_negatives_changes_pr_not_roc() {
        let scores = vec![0.9, 0.8, 0.7, 0.6, 0.5, 0.4];
        let labels = vec![true, false, true, false, true, false];
        let (roc, pr) = (roc_auc(&scores, &labels).unwrap(), pr_auc(&scores, &labels).unwrap());
        let mut s2 = scores.clone();
        let mut l2 = labels.clone();
        for (s, l) in scores.iter().zip(&labels) {
            if !l {
                s2.push(*s);
                l2.push(false);
            }
        }
        assert_eq!(roc_auc(&s2, &l2).unwrap(), roc);
        assert!(pr_auc(&s2, &l2).unwrap() < pr);
    }

    fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<bool>)> {
        prop::collection::vec((0u8..20, any::<bool>()), 2..80)
            .prop_map(|v| v.into_iter().map(|(s, l)| (s as f64 / 7.0, l)).unzip())
            .prop_filter("both classes", |(_, l): &(Vec<f64>, Vec<bool>)| {
                l.iter().any(|&x| x) && l.iter().any(|&x| !x)
            })
    }

    proptest! {
        #[test]
        fn monotone_transform_invariance((scores, labels) in scored_labels()) {
            let t: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 2.0).collect();
            prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&t, &labels).unwrap());
            prop_assert_eq!(pr_auc(&scores, &labels).unwrap(), pr_auc(&t, &labels).unwrap());
        }

        #[test]
        fn order_independence((scores, labels) in scored_labels()) {
            let rs: Vec<f64> = scores.iter().rev().copied().collect();
            let rl: Vec<bool> = labels.iter().rev().copied().collect();
            prop_assert_eq!(roc_auc(&scores, &labels).unwrap(), roc_auc(&rs, &rl).unwrap());
            prop_assert_eq!(pr_auc(&scores, &labels).unwrap(), pr_auc(&rs, &rl).unwrap());
        }

        #[test]
        fn complement_symmetry_without_ties(labels in prop::collection::vec(any::<bool>(), 2..60)) {
            prop_assume!(labels.iter().any(|&x| x) && labels.iter().any(|&x| !x));
            let scores: Vec<f64> = (0..labels.len()).map(|i| ((i * 37) % 101) as f64).collect();
            let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
            let a = roc_auc(&scores, &labels).unwrap();
            let b = roc_auc(&neg, &labels).unwrap();
            prop_assert!((a + b - 1.0).abs() < 1e-12);
        }
    }
}
