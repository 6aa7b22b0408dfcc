use misinfo_core::eval::{auc_pair_oracle, compute_metrics, confusion, roc_auc};
use proptest::prelude::*;

fn labeled_scores() -> impl Strategy<Value = (Vec<u8>, Vec<f64>)> {
    (2usize..80).prop_flat_map(|n| {
        (
            prop::collection::vec(0u8..=1, n).prop_filter("both classes", |l| l.contains(&0) && l.contains(&1)),
            prop::collection::vec(prop::sample::select(vec![-1.0, -0.25, 0.0, 0.1, 0.5, 0.9, 2.0]), n),
        )
    })
}

proptest! {
    #[test]
    fn auc_matches_pair_count((labels, scores) in labeled_scores()) {
        let auc = roc_auc(&labels, &scores).unwrap().1;
        prop_assert!((auc - auc_pair_oracle(&labels, &scores).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn auc_is_invariant_to_monotone_maps((labels, scores) in labeled_scores()) {
        let auc = roc_auc(&labels, &scores).unwrap().1;
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp()).collect();
        prop_assert!((roc_auc(&labels, &mapped).unwrap().1 - auc).abs() < 1e-12);
        let flipped: Vec<f64> = scores.iter().map(|s| -s).collect();
        prop_assert!((roc_auc(&labels, &flipped).unwrap().1 - (1.0 - auc)).abs() < 1e-12);
    }

    #[test]
    fn roc_is_monotone_from_origin_to_corner((labels, scores) in labeled_scores()) {
        let (curve, _) = roc_auc(&labels, &scores).unwrap();
        prop_assert_eq!(curve.points.first().copied(), Some((0.0, 0.0)));
        prop_assert_eq!(curve.points.last().copied(), Some((1.0, 1.0)));
        for w in curve.points.windows(2) {
            prop_assert!(w[1].0 >= w[0].0 && w[1].1 >= w[0].1);
        }
        prop_assert!(curve.thresholds[0].is_infinite());
    }

    #[test]
    fn confusion_counts_add_up((labels, scores) in labeled_scores(), thr in -1.0f64..1.0) {
        let m = compute_metrics(&labels, &scores, thr).unwrap();
        prop_assert_eq!(m.confusion.total(), labels.len());
        let pred: Vec<u8> = scores.iter().map(|&s| u8::from(s >= thr)).collect();
        prop_assert_eq!(confusion(&labels, &pred).unwrap(), m.confusion);
        let c = m.confusion;
        prop_assert!((m.accuracy - (c.tp + c.tn) as f64 / labels.len() as f64).abs() < 1e-15);
    }
}

#[test]
fn roc_csv_lists_every_point() {
    let (curve, auc) = roc_auc(&[0, 1, 0, 1], &[0.1, 0.9, 0.4, 0.4]).unwrap();
    assert!((auc - 0.875).abs() < 1e-15);
    let csv = curve.to_csv();
    assert!(csv.starts_with("threshold,fpr,tpr\n"));
    assert_eq!(csv.lines().count(), curve.points.len() + 1);
}

#[test]
fn single_class_auc_is_an_error() {
    assert!(roc_auc(&[1, 1, 1], &[0.1, 0.2, 0.3]).is_err());
    assert!(roc_auc(&[1, 0], &[0.1]).is_err());
}
