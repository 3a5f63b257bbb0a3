//! Binary classification metrics: accuracy, F1, and AUROC.
//!
//! AUROC uses the Mann-Whitney rank formulation with average ranks for ties,
//! i.e. the probability that a random positive outscores a random negative
//! with ties counting one half.

use crate::error::{Error, Result};

fn check_labels(labels: &[u8]) -> Result<()> {
    for &l in labels {
        if l > 1 {
            return Err(Error::invalid("label", format!("{l} not in {{0,1}}")));
        }
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(preds: &[u8], labels: &[u8]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::invalid("metrics", "empty input"));
    }
    check_labels(labels)?;
    let hits = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    Ok(hits as f64 / preds.len() as f64)
}

/// F1 for the positive class (label 1); 0 when precision + recall is 0.
pub fn f1(preds: &[u8], labels: &[u8]) -> Result<f64> {
    if preds.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: preds.len(),
            right: labels.len(),
        });
    }
    if preds.is_empty() {
        return Err(Error::invalid("metrics", "empty input"));
    }
    check_labels(labels)?;
    let mut tp = 0u64;
    let mut fp = 0u64;
    let mut fn_ = 0u64;
    for (&p, &l) in preds.iter().zip(labels) {
        match (p, l) {
            (1, 1) => tp += 1,
            (1, 0) => fp += 1,
            (0, 1) => fn_ += 1,
            _ => {}
        }
    }
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        return Ok(0.0);
    }
    Ok(2.0 * tp as f64 / denom as f64)
}

/// Area under the ROC curve from raw scores.
///
/// Errors unless both classes are present.
pub fn auroc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::LengthMismatch {
            left: scores.len(),
            right: labels.len(),
        });
    }
    check_labels(labels)?;
    let pos = labels.iter().filter(|&&l| l == 1).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // average ranks over tie groups, 1-based
    let mut rank = vec![0.0f64; scores.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg = (i + j + 2) as f64 / 2.0;
        for k in i..=j {
            rank[order[k]] = avg;
        }
        i = j + 1;
    }

    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&rank)
        .filter(|(&l, _)| l == 1)
        .map(|(_, &r)| r)
        .sum();
    let p = pos as f64;
    let u = rank_sum_pos - p * (p + 1.0) / 2.0;
    Ok(u / (p * neg as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn accuracy_cases() {
        let labels = vec![1, 0, 1, 0, 1, 0, 1, 0, 1, 0];
        let mut preds = labels.clone();
        preds[0] = 0;
        preds[1] = 1;
        preds[2] = 0;
        assert_abs_diff_eq!(accuracy(&preds, &labels).unwrap(), 0.7);
        assert_abs_diff_eq!(accuracy(&labels, &labels).unwrap(), 1.0);
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        assert_abs_diff_eq!(accuracy(&flipped, &labels).unwrap(), 0.0);
    }

    #[test]
    fn accuracy_length_mismatch() {
        assert!(matches!(
            accuracy(&[1, 0], &[1]),
            Err(Error::LengthMismatch { .. })
        ));
    }

    #[test]
    fn f1_hand_case() {
        // TP=2, FP=1, FN=1 -> P=R=2/3 -> F1=2/3
        let preds = vec![1, 1, 1, 0, 0];
        let labels = vec![1, 1, 0, 1, 0];
        assert_abs_diff_eq!(f1(&preds, &labels).unwrap(), 2.0 / 3.0, epsilon = 1e-12);
    }

    #[test]
    fn f1_perfect_and_degenerate() {
        assert_abs_diff_eq!(f1(&[1, 0, 1], &[1, 0, 1]).unwrap(), 1.0);
        assert_abs_diff_eq!(f1(&[0, 0], &[0, 0]).unwrap(), 0.0);
    }

    #[test]
    fn auroc_perfect_separation() {
        let auc = auroc(&[0.9, 0.8, 0.3, 0.2], &[1, 1, 0, 0]).unwrap();
        assert_abs_diff_eq!(auc, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn auroc_hand_case() {
        let auc = auroc(&[0.9, 0.8, 0.3, 0.2], &[1, 0, 1, 0]).unwrap();
        assert_abs_diff_eq!(auc, 0.75, epsilon = 1e-12);
    }

    #[test]
    fn auroc_all_ties_is_half() {
        let auc = auroc(&[0.5, 0.5, 0.5, 0.5], &[1, 0, 1, 0]).unwrap();
        assert_abs_diff_eq!(auc, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn auroc_single_class_errors() {
        assert!(matches!(
            auroc(&[0.1, 0.2], &[1, 1]),
            Err(Error::SingleClass)
        ));
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn scored_labels() -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
            (2usize..20).prop_flat_map(|n| {
                (
                    // quantized scores so ties actually occur
                    proptest::collection::vec(0u8..10, n)
                        .prop_map(|v| v.into_iter().map(|q| q as f64 / 10.0).collect::<Vec<f64>>()),
                    proptest::collection::vec(0u8..2, n),
                )
            })
            .prop_filter("both classes", |(_, l)| {
                l.contains(&0) && l.contains(&1)
            })
        }

        proptest! {
            #[test]
            fn auroc_invariant_under_monotone_transforms((scores, labels) in scored_labels()) {
                let base = auroc(&scores, &labels).unwrap();
                let shifted: Vec<f64> = scores.iter().map(|&s| 3.0 * s + 1.0).collect();
                let exped: Vec<f64> = scores.iter().map(|&s| s.exp()).collect();
                let atan: Vec<f64> = scores.iter().map(|&s| s.atan()).collect();
                prop_assert_eq!(base, auroc(&shifted, &labels).unwrap());
                prop_assert_eq!(base, auroc(&exped, &labels).unwrap());
                prop_assert_eq!(base, auroc(&atan, &labels).unwrap());
            }

            #[test]
            fn auroc_matches_pairwise_definition((scores, labels) in scored_labels()) {
                let got = auroc(&scores, &labels).unwrap();
                // brute force over positive-negative pairs, ties count half
                let mut wins = 0.0f64;
                let mut total = 0.0f64;
                for (i, &li) in labels.iter().enumerate() {
                    if li != 1 {
                        continue;
                    }
                    for (j, &lj) in labels.iter().enumerate() {
                        if lj != 0 {
                            continue;
                        }
                        total += 1.0;
                        if scores[i] > scores[j] {
                            wins += 1.0;
                        } else if scores[i] == scores[j] {
                            wins += 0.5;
                        }
                    }
                }
                prop_assert!((got - wins / total).abs() < 1e-12);
            }
        }
    }
}
