use proptest::prelude::*;
use rprofile_core::metrics::{compare, pearson, Histogram};

fn values() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.001f64..0.999, 5..200)
}

fn width() -> impl Strategy<Value = f64> {
    prop_oneof![Just(0.05), Just(0.1), Just(0.2), Just(0.025)]
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn comparing_a_histogram_with_itself_is_the_identity(v in values(), w in width()) {
        let h = Histogram::from_values(&v, w).unwrap();
        let m = compare(&h, &h).unwrap();
        prop_assert!(m.d_kl.abs() < 1e-12);
        prop_assert_eq!(m.chisq, 0.0);
        prop_assert!((m.intersect - 1.0).abs() < 1e-12);
        prop_assert!(m.bhattacharyya.abs() < 1e-6);
        // A flat histogram has no variance to correlate.
        let flat = h.weights().windows(2).all(|p| p[0] == p[1]);
        prop_assert!(flat || (m.corr - 1.0).abs() < 1e-12, "corr {}", m.corr);
    }

    #[test]
    fn overlap_metrics_are_symmetric_and_bounded(a in values(), b in values(), w in width()) {
        let (p, q) = (Histogram::from_values(&a, w).unwrap(), Histogram::from_values(&b, w).unwrap());
        let (pq, qp) = (compare(&p, &q).unwrap(), compare(&q, &p).unwrap());
        prop_assert!((pq.intersect - qp.intersect).abs() < 1e-12);
        prop_assert!((pq.bhattacharyya - qp.bhattacharyya).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&pq.intersect));
        prop_assert!((0.0..=1.0).contains(&pq.bhattacharyya));
        prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&pq.corr));
        prop_assert!(pq.d_kl >= -1e-12);
    }

    #[test]
    fn metrics_ignore_sample_size(a in values(), b in values(), w in width(), k in 2usize..5) {
        let scaled: Vec<f64> = a.iter().flat_map(|&x| std::iter::repeat_n(x, k)).collect();
        let q = Histogram::from_values(&b, w).unwrap();
        let m1 = compare(&Histogram::from_values(&a, w).unwrap(), &q).unwrap();
        let m2 = compare(&Histogram::from_values(&scaled, w).unwrap(), &q).unwrap();
        for (x, y) in [(m1.d_kl, m2.d_kl), (m1.chisq, m2.chisq), (m1.intersect, m2.intersect), (m1.corr, m2.corr)] {
            prop_assert!((x - y).abs() <= 1e-9 * x.abs().max(1.0), "{x} vs {y}");
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        xs in prop::collection::vec(-10.0f64..10.0, 3..50),
        ys in prop::collection::vec(-10.0f64..10.0, 3..50),
        a in 0.1f64..5.0,
        c in -5.0f64..5.0,
    ) {
        let n = xs.len().min(ys.len());
        let (xs, ys) = (&xs[..n], &ys[..n]);
        if let Ok(r) = pearson(xs, ys) {
            let moved: Vec<f64> = xs.iter().map(|x| a * x + c).collect();
            prop_assert!((pearson(&moved, ys).unwrap() - r).abs() < 1e-9);
        }
    }
}
