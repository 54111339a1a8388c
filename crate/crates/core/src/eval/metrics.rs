//! FPR at a fixed TPR, and the micro-F1 confidence threshold.
//!
//! Scores are distances: lower means more in-distribution, and a sample is
//! accepted when its distance is `<= threshold`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::monitor::{check_target, required_count};

/// Operating point of one ID/OoD score comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatingPoint {
    pub target_tpr: f64,
    pub distance_threshold: f64,
    pub achieved_tpr: f64,
    pub fpr: f64,
    pub id_count: usize,
    pub ood_count: usize,
}

fn check_scores(name: &str, xs: &[f64]) -> Result<()> {
    if xs.is_empty() {
        return Err(Error::EmptyInput(format!("{name} distance list")));
    }
    if xs.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidParameter(format!("NaN in {name} distances")));
    }
    Ok(())
}

/// The threshold is the smallest ID distance that accepts at least
/// `target_tpr` of the ID list; FPR is the accepted share of the OoD list.
pub fn fpr_at_tpr(id: &[f64], ood: &[f64], target_tpr: f64) -> Result<OperatingPoint> {
    check_target(target_tpr)?;
    check_scores("ID", id)?;
    check_scores("OoD", ood)?;
    let mut sorted = id.to_vec();
    sorted.sort_by(f64::total_cmp);
    let need = required_count(target_tpr, sorted.len());
    let threshold = sorted[need - 1];
    let accepted_id = sorted.partition_point(|&d| d <= threshold);
    let accepted_ood = ood.iter().filter(|&&d| d <= threshold).count();
    Ok(OperatingPoint {
        target_tpr,
        distance_threshold: threshold,
        achieved_tpr: accepted_id as f64 / id.len() as f64,
        fpr: accepted_ood as f64 / ood.len() as f64,
        id_count: id.len(),
        ood_count: ood.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct F1Threshold {
    pub threshold: f64,
    pub f1: f64,
    /// No candidate yields a true positive; `threshold` is above every score.
    pub degenerate: bool,
}

pub const DEFAULT_F1_EPSILON: f64 = 1e-6;

/// Confidence cutoff that maximizes micro F1 = 2TP / (2TP + FP + FN).
///
/// Candidates are the distinct scores; a prediction is kept when its score
/// is `>= threshold`. Ties go to the lowest threshold. If no threshold keeps
/// a true positive, returns `max score + epsilon` flagged as degenerate.
pub fn micro_f1_threshold(
    scored: &[(f64, bool)],
    total_ground_truth: usize,
    epsilon: f64,
) -> Result<F1Threshold> {
    if scored.is_empty() {
        return Err(Error::EmptyInput(
            "micro-F1 threshold over zero predictions".into(),
        ));
    }
    if scored.iter().any(|s| s.0.is_nan()) {
        return Err(Error::InvalidParameter("NaN prediction score".into()));
    }
    let positives = scored.iter().filter(|s| s.1).count();
    if positives > total_ground_truth {
        return Err(Error::InvalidParameter(format!(
            "{positives} true positives but only {total_ground_truth} ground-truth objects"
        )));
    }

    let mut by_score = scored.to_vec();
    by_score.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (mut tp, mut fp) = (0usize, 0usize);
    let mut best: Option<(f64, f64)> = None;
    let mut i = 0;
    // descending sweep; each group of equal scores is one candidate
    while i < by_score.len() {
        let tau = by_score[i].0;
        while i < by_score.len() && by_score[i].0 == tau {
            if by_score[i].1 {
                tp += 1;
            } else {
                fp += 1;
            }
            i += 1;
        }
        let fneg = total_ground_truth - tp;
        let f1 = 2.0 * tp as f64 / (2 * tp + fp + fneg) as f64;
        // `>=` while descending leaves the lowest threshold among ties
        if best.is_none_or(|(_, bf)| f1 >= bf) {
            best = Some((tau, f1));
        }
    }
    let (threshold, f1) = best.expect("non-empty input");
    if f1 == 0.0 {
        return Ok(F1Threshold {
            threshold: by_score[0].0 + epsilon,
            f1: 0.0,
            degenerate: true,
        });
    }
    Ok(F1Threshold {
        threshold,
        f1,
        degenerate: false,
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    /// Tries every candidate threshold (each ID value) and keeps the
    /// smallest one meeting the target.
    fn sweep_oracle(id: &[f64], ood: &[f64], t: f64) -> (f64, f64) {
        let mut best: Option<f64> = None;
        for &tau in id {
            let acc = id.iter().filter(|&&d| d <= tau).count() as f64 / id.len() as f64;
            if acc >= t && best.is_none_or(|b| tau < b) {
                best = Some(tau);
            }
        }
        let tau = best.unwrap();
        let fpr = ood.iter().filter(|&&d| d <= tau).count() as f64 / ood.len() as f64;
        (tau, fpr)
    }

    #[test]
    fn nineteen_zeros_and_a_five() {
        let mut id = vec![0.0; 19];
        id.push(5.0);
        let op = fpr_at_tpr(&id, &[0.0, 1.0, 2.0, 3.0], 0.95).unwrap();
        assert_eq!(op.distance_threshold, 0.0);
        assert_eq!(op.fpr, 0.25);
        assert_eq!(op.achieved_tpr, 0.95);
        assert_eq!((op.id_count, op.ood_count), (20, 4));
        assert_eq!(sweep_oracle(&id, &[0.0, 1.0, 2.0, 3.0], 0.95), (0.0, 0.25));
    }

    #[test]
    fn perfect_separation() {
        let op = fpr_at_tpr(&[0.0; 10], &[0.5, 1.0, 3.0], 0.95).unwrap();
        assert_eq!(op.distance_threshold, 0.0);
        assert_eq!(op.fpr, 0.0);
        assert_eq!(op.achieved_tpr, 1.0);
    }

    #[test]
    fn identical_lists() {
        let xs: Vec<f64> = (0..40).map(|i| (i % 13) as f64).collect();
        let op = fpr_at_tpr(&xs, &xs, 0.95).unwrap();
        assert_eq!(op.fpr, op.achieved_tpr);
        assert!(op.achieved_tpr >= 0.95);
    }

    #[test]
    fn errors() {
        assert!(fpr_at_tpr(&[], &[1.0], 0.95).is_err());
        assert!(fpr_at_tpr(&[1.0], &[], 0.95).is_err());
        assert!(fpr_at_tpr(&[1.0], &[1.0], 0.0).is_err());
        assert!(fpr_at_tpr(&[f64::NAN], &[1.0], 0.5).is_err());
    }

    #[test]
    fn f1_examples() {
        let r = micro_f1_threshold(&[(0.9, true), (0.8, true), (0.3, false)], 2, 1e-6).unwrap();
        assert_eq!(r.threshold, 0.8);
        assert_eq!(r.f1, 1.0);
        assert!(!r.degenerate);

        let r = micro_f1_threshold(&[(0.5, true)], 1, 1e-6).unwrap();
        assert_eq!(r.threshold, 0.5);

        let r = micro_f1_threshold(&[(0.4, false), (0.7, false)], 3, 0.01).unwrap();
        assert!(r.degenerate);
        assert_eq!(r.threshold, 0.7 + 0.01);
        assert_eq!(r.f1, 0.0);

        assert!(micro_f1_threshold(&[], 1, 1e-6).is_err());
        assert!(micro_f1_threshold(&[(0.5, true), (0.6, true)], 1, 1e-6).is_err());
    }

    #[test]
    fn f1_tie_prefers_lowest_threshold() {
        // tau=0.9: TP1 FP0 FN1 -> 2/3; tau=0.5: TP2 FP2 FN0 -> 4/6 = 2/3
        let r = micro_f1_threshold(
            &[(0.9, true), (0.5, true), (0.5, false), (0.5, false)],
            2,
            1e-6,
        )
        .unwrap();
        assert_eq!(r.threshold, 0.5);
    }

    fn f1_oracle(scored: &[(f64, bool)], gt: usize) -> (f64, f64) {
        let mut best = (f64::INFINITY, -1.0);
        for &(tau, _) in scored {
            let tp = scored.iter().filter(|s| s.1 && s.0 >= tau).count();
            let fp = scored.iter().filter(|s| !s.1 && s.0 >= tau).count();
            let f1 = 2.0 * tp as f64 / (2 * tp + fp + gt - tp) as f64;
            if f1 > best.1 || (f1 == best.1 && tau < best.0) {
                best = (tau, f1);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn matches_sweep_oracle(
            id in prop::collection::vec(0u8..20, 1..60),
            ood in prop::collection::vec(0u8..20, 1..60),
            t in prop::sample::select(vec![0.5, 0.9, 0.95, 0.99, 1.0]),
        ) {
            let id: Vec<f64> = id.into_iter().map(f64::from).collect();
            let ood: Vec<f64> = ood.into_iter().map(f64::from).collect();
            let op = fpr_at_tpr(&id, &ood, t).unwrap();
            prop_assert_eq!((op.distance_threshold, op.fpr), sweep_oracle(&id, &ood, t));
            prop_assert!(op.achieved_tpr >= t);
        }

        #[test]
        fn rank_invariant_under_monotone_maps(
            id in prop::collection::vec(0.0f64..10.0, 1..50),
            ood in prop::collection::vec(0.0f64..10.0, 1..50),
        ) {
            let a = fpr_at_tpr(&id, &ood, 0.95).unwrap();
            let f = |v: &f64| (v * 3.0 + 1.0).exp();
            let b = fpr_at_tpr(&id.iter().map(f).collect::<Vec<_>>(), &ood.iter().map(f).collect::<Vec<_>>(), 0.95).unwrap();
            prop_assert_eq!(a.fpr, b.fpr);
            prop_assert_eq!(a.achieved_tpr, b.achieved_tpr);
        }

        #[test]
        fn lower_target_never_raises_threshold(
            id in prop::collection::vec(0.0f64..10.0, 1..50),
            t1 in 0.01f64..=1.0,
            t2 in 0.01f64..=1.0,
        ) {
            let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
            let a = fpr_at_tpr(&id, &[0.0], lo).unwrap();
            let b = fpr_at_tpr(&id, &[0.0], hi).unwrap();
            prop_assert!(a.distance_threshold <= b.distance_threshold);
        }

        #[test]
        fn f1_matches_brute_force(
            scored in prop::collection::vec((0u8..10, any::<bool>()), 1..30),
            extra_gt in 0usize..5,
        ) {
            let scored: Vec<(f64, bool)> = scored.into_iter().map(|(s, t)| (f64::from(s) / 10.0, t)).collect();
            let gt = scored.iter().filter(|s| s.1).count() + extra_gt;
            let r = micro_f1_threshold(&scored, gt, 1e-6).unwrap();
            let (tau, f1) = f1_oracle(&scored, gt);
            if f1 > 0.0 {
                prop_assert_eq!((r.threshold, r.f1), (tau, f1));
                prop_assert!(scored.iter().any(|s| s.0 == r.threshold));
            } else {
                prop_assert!(r.degenerate);
            }
        }
    }
}
