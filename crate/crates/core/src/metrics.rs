//! Classification and ranking metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{edge_homophily_degree, LabeledGraph};

fn check_lengths(pred: usize, truth: usize) -> Result<()> {
    if pred != truth {
        return Err(Error::ShapeMismatch(format!(
            "{pred} predictions for {truth} labels"
        )));
    }
    if pred == 0 {
        return Err(Error::InvalidParameter("no labels to score".into()));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], truth: &[usize]) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    let hits = pred.iter().zip(truth).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / pred.len() as f64)
}

/// Unweighted mean of per-class F1. A class that is neither predicted nor
/// present scores 0.
pub fn f1_macro(pred: &[usize], truth: &[usize], num_classes: usize) -> Result<f64> {
    check_lengths(pred.len(), truth.len())?;
    if num_classes == 0 {
        return Err(Error::InvalidParameter("num_classes must be positive".into()));
    }
    if let Some(&c) = pred.iter().chain(truth).find(|&&c| c >= num_classes) {
        return Err(Error::InvalidParameter(format!(
            "label {c} outside 0..{num_classes}"
        )));
    }
    let mut tp = vec![0usize; num_classes];
    let mut fp = vec![0usize; num_classes];
    let mut fn_ = vec![0usize; num_classes];
    for (&p, &t) in pred.iter().zip(truth) {
        if p == t {
            tp[p] += 1;
        } else {
            fp[p] += 1;
            fn_[t] += 1;
        }
    }
    let total: f64 = (0..num_classes)
        .map(|c| {
            let denom = 2 * tp[c] + fp[c] + fn_[c];
            if denom == 0 {
                0.0
            } else {
                2.0 * tp[c] as f64 / denom as f64
            }
        })
        .sum();
    Ok(total / num_classes as f64)
}

/// Mann–Whitney area under the ROC curve; tied scores count one half.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    check_lengths(scores.len(), labels.len())?;
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedAuc);
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks are 1-based; a tied block shares its average rank.
        let avg_rank = (start + end + 1) as f64 / 2.0;
        let pos_in_block = order[start..end].iter().filter(|&&i| labels[i]).count();
        pos_rank_sum += avg_rank * pos_in_block as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Ok(u / (n_pos as f64 * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HdReport {
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

/// Edge homophily of `before` and `after`, scored with `labels`.
pub fn hd_delta_report(
    before: &LabeledGraph,
    after: &LabeledGraph,
    labels: &[usize],
) -> Result<HdReport> {
    let score = |g: &LabeledGraph| -> Result<f64> {
        if labels.len() != g.num_nodes() {
            return Err(Error::ShapeMismatch(format!(
                "{} labels for {} nodes",
                labels.len(),
                g.num_nodes()
            )));
        }
        let relabeled = g.clone().with_labels(labels.to_vec())?;
        edge_homophily_degree(&relabeled)
    };
    let b = score(before)?;
    let a = score(after)?;
    Ok(HdReport {
        before: b,
        after: a,
        delta: a - b,
    })
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[1, 1], &[1, 1]).unwrap(), 1.0);
        assert_eq!(accuracy(&[0, 0], &[1, 1]).unwrap(), 0.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[0], &[0, 1]).is_err());
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1_macro(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        let f = f1_macro(&[0, 0, 0, 0], &[0, 0, 1, 1], 2).unwrap();
        assert!((f - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(f1_macro(&[0, 0], &[0, 0], 1).unwrap(), 1.0);
        assert!(f1_macro(&[2], &[0], 2).is_err());
    }

    #[test]
    fn auc_examples() {
        assert_eq!(roc_auc(&[0.1, 0.9], &[false, true]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.9, 0.1], &[false, true]).unwrap(), 0.0);
        assert_eq!(roc_auc(&[0.5, 0.5], &[true, false]).unwrap(), 0.5);
        assert!(matches!(
            roc_auc(&[0.2, 0.3], &[true, true]),
            Err(Error::UndefinedAuc)
        ));
    }

    fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for (i, &li) in labels.iter().enumerate() {
            for (j, &lj) in labels.iter().enumerate() {
                if li && !lj {
                    den += 1.0;
                    num += match scores[i].partial_cmp(&scores[j]).unwrap() {
                        std::cmp::Ordering::Greater => 1.0,
                        std::cmp::Ordering::Equal => 0.5,
                        std::cmp::Ordering::Less => 0.0,
                    };
                }
            }
        }
        num / den
    }

    proptest! {
        #[test]
        fn auc_matches_pair_count(data in prop::collection::vec((0u8..6, any::<bool>()), 2..40)) {
            let scores: Vec<f64> = data.iter().map(|d| d.0 as f64 / 5.0).collect();
            let labels: Vec<bool> = data.iter().map(|d| d.1).collect();
            prop_assume!(labels.iter().any(|&l| l) && labels.iter().any(|&l| !l));
            let auc = roc_auc(&scores, &labels).unwrap();
            prop_assert!((auc - brute_auc(&scores, &labels)).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&auc));
            let warped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 7.0).collect();
            prop_assert_eq!(auc, roc_auc(&warped, &labels).unwrap());
        }

        #[test]
        fn f1_and_accuracy_in_unit_interval(pairs in prop::collection::vec((0usize..4, 0usize..4), 1..30)) {
            let p: Vec<usize> = pairs.iter().map(|x| x.0).collect();
            let t: Vec<usize> = pairs.iter().map(|x| x.1).collect();
            let f = f1_macro(&p, &t, 4).unwrap();
            let a = accuracy(&p, &t).unwrap();
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn mean_std_uses_sample_variance() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 2f64.sqrt()).abs() < 1e-15);
    }
}
