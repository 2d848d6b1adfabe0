use openended_core::memory::PerceptualMemory;
use openended_core::{
    combined_distance, distance, normalize_l1, CombineWeight, FeatureView, MetricId,
    RecognizerConfig,
};
use proptest::prelude::*;

fn hist(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(prop_oneof![1 => Just(0.0), 4 => 0.0..1.0f64], d)
        .prop_filter("nonzero", |v| v.iter().sum::<f64>() > 0.0)
        .prop_map(|v| normalize_l1(&v).unwrap().into_inner())
}

fn pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2..24usize).prop_flat_map(|d| (hist(d), hist(d)))
}

fn triple() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, Vec<f64>)> {
    (2..24usize).prop_flat_map(|d| (hist(d), hist(d), hist(d)))
}

fn metric() -> impl Strategy<Value = MetricId> {
    (0..MetricId::ALL.len()).prop_map(|i| MetricId::ALL[i])
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1.0)
}

proptest! {
    #[test]
    fn declared_symmetric_metrics_are_symmetric((p, q) in pair()) {
        for m in MetricId::ALL.into_iter().filter(|m| m.is_symmetric()) {
            let pq = distance(m, &p, &q).unwrap();
            let qp = distance(m, &q, &p).unwrap();
            prop_assert!(rel(pq, qp) <= 1e-12, "{} {} {}", m, pq, qp);
        }
    }

    #[test]
    fn pearson_is_neyman_swapped((p, q) in pair()) {
        let a = distance(MetricId::Pearson, &p, &q).unwrap();
        let b = distance(MetricId::Neyman, &q, &p).unwrap();
        prop_assert!(rel(a, b) <= 1e-12);
    }

    #[test]
    fn nonnegative_and_identity((p, q) in pair(), m in metric()) {
        prop_assert!(distance(m, &p, &q).unwrap() >= 0.0);
        let pp = distance(m, &p, &p).unwrap();
        prop_assert!((pp - m.identity_value()).abs() <= 1e-9, "{} {}", m, pp);
    }

    #[test]
    fn triangle_inequality((p, q, r) in triple()) {
        for m in [MetricId::Euclidean, MetricId::Manhattan, MetricId::Gower, MetricId::Sorensen] {
            let pr = distance(m, &p, &r).unwrap();
            let pq = distance(m, &p, &q).unwrap();
            let qr = distance(m, &q, &r).unwrap();
            prop_assert!(pr <= pq + qr + 1e-12, "{}: {} > {} + {}", m, pr, pq, qr);
        }
    }

    #[test]
    fn combined_is_monotone_in_w(
        (ph, qh) in pair(), (pd, qd) in pair(), mh in metric(), md in metric(),
        w1 in 0.0..=1.0f64, w2 in 0.0..=1.0f64,
    ) {
        let a = FeatureView::new("a", "", "", Some(normalize_l1(&ph).unwrap()), Some(normalize_l1(&pd).unwrap())).unwrap();
        let b = FeatureView::new("b", "", "", Some(normalize_l1(&qh).unwrap()), Some(normalize_l1(&qd).unwrap())).unwrap();
        let (lo, hi) = if w1 <= w2 { (w1, w2) } else { (w2, w1) };
        let dh = distance(mh, &ph, &qh).unwrap();
        let dd = distance(md, &pd, &qd).unwrap();
        let at = |w| combined_distance(&a, &b, CombineWeight::new(w).unwrap(), mh, md).unwrap();
        let slack = 1e-12 * dh.abs().max(dd.abs()).max(1.0);
        if dd > dh {
            prop_assert!(at(lo) <= at(hi) + slack);
        } else if dd < dh {
            prop_assert!(at(lo) + slack >= at(hi));
        }
    }

    #[test]
    fn single_weight_argmin_matches_single_metric(
        seed_views in prop::collection::vec((hist(6), hist(5)), 1..12),
        (qh, qd) in (hist(6), hist(5)),
        mh in metric(), md in metric(),
    ) {
        let query = FeatureView::new("", "", "", Some(normalize_l1(&qh).unwrap()), Some(normalize_l1(&qd).unwrap())).unwrap();
        let views: Vec<FeatureView> = seed_views
            .iter()
            .enumerate()
            .map(|(i, (h, d))| FeatureView::new(format!("c{i:02}"), "", "", Some(normalize_l1(h).unwrap()), Some(normalize_l1(d).unwrap())).unwrap())
            .collect();
        for (w, m, pick) in [(CombineWeight::HAND_ONLY, mh, 0), (CombineWeight::DEEP_ONLY, md, 1)] {
            let cfg = RecognizerConfig { metric_h: mh, metric_d: md, w, k: 1, ..RecognizerConfig::default() };
            let mut mem = PerceptualMemory::new(cfg).unwrap();
            for v in &views {
                mem.teach(&v.category.clone(), v.clone()).unwrap();
            }
            let got = mem.nearest(&query, 1).unwrap()[0].distance;
            let single = views
                .iter()
                .map(|v| {
                    let (x, y) = if pick == 0 { (&query.hand, &v.hand) } else { (&query.deep, &v.deep) };
                    distance(m, x.as_ref().unwrap(), y.as_ref().unwrap()).unwrap()
                })
                .fold(f64::INFINITY, f64::min);
            prop_assert_eq!(got.to_bits(), single.to_bits());
        }
    }
}

#[test]
fn unknown_metric_names_are_rejected() {
    assert!("hamming".parse::<MetricId>().is_err());
    assert_eq!("Bhattacharyya".parse::<MetricId>().unwrap(), MetricId::Bhattacharyya);
}

#[test]
fn mismatched_lengths_are_rejected() {
    assert!(distance(MetricId::Euclidean, &[0.5, 0.5], &[1.0, 0.0, 0.0]).is_err());
}
