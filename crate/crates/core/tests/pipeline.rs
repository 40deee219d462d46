use proptest::prelude::*;
use rprofile_core::distributions::{BetaParams, Family};
use rprofile_core::estimation::ShapeClass;
use rprofile_core::pipeline::{
    estimate_main, estimate_profile, estimate_subs, split, HyperParams, MainKind, Polarity, SubKind, UserDataset,
};
use rprofile_core::simulation::{builtin_conditions, data_seed, find_condition};

fn dataset(id: u32, n: usize, seed: u64, polarity: Polarity) -> UserDataset {
    let values = find_condition(id).unwrap().sample(n, seed).unwrap();
    UserDataset::from_unit_values(&format!("sim-{id}"), &values, polarity).unwrap()
}

fn hp(family: Family, th: f64, accept_bidist: f64) -> HyperParams {
    HyperParams { family, th, accept_bidist, ..HyperParams::default() }
}

#[test]
fn ers_with_mrs_recovers_half_weight() {
    let data = dataset(21, 1000, data_seed(42, 21, 0), Polarity::Bipolar);
    let p = estimate_profile(&data, &hp(Family::Beta, 0.15, 0.15)).unwrap();
    assert_eq!(p.main.kind, MainKind::Mrs);
    assert_eq!(p.sub.kind, SubKind::Ers);
    assert!([0.4, 0.5, 0.6].iter().any(|w| (p.sub.w_ade - w).abs() < 1e-9), "w_ade {}", p.sub.w_ade);
}

#[test]
fn clean_unimodal_condition_has_no_sub() {
    let data = dataset(14, 1000, data_seed(42, 14, 0), Polarity::Bipolar);
    for family in [Family::Beta, Family::Gaussian] {
        let p = estimate_profile(&data, &hp(family, 0.15, 0.15)).unwrap();
        assert_eq!(p.sub.kind, SubKind::None, "{family:?}");
        assert_eq!(p.sub.w_ade, 0.0);
    }
}

#[test]
fn drs_with_bimrs() {
    let data = dataset(34, 1000, data_seed(42, 34, 0), Polarity::Bipolar);
    for family in [Family::Beta, Family::Gaussian] {
        let p = estimate_profile(&data, &hp(family, 0.15, 0.15)).unwrap();
        assert_eq!((p.main.kind, p.sub.kind), (MainKind::BiMrs, SubKind::Drs), "{family:?}");
    }
}

#[test]
fn well_separated_bimodal_main() {
    let values = find_condition(17).unwrap().sample(1000, data_seed(42, 17, 0)).unwrap();
    let (d_main, _) = split(&values, 0.15);
    for family in [Family::Beta, Family::Gaussian] {
        let sel = estimate_main(&d_main, true, &hp(family, 0.15, 0.15)).unwrap();
        assert_eq!(sel.main.kind, MainKind::BiMrs, "{family:?}");
    }
}

#[test]
fn beta_ten_ten_is_mostly_mrs() {
    // A single draw can favor two components by chance (Beta(10,10) is
    // lighter-tailed than one Gaussian), so the claim is about frequency.
    for family in [Family::Beta, Family::Gaussian] {
        let hits = (0..40)
            .filter(|&r| {
                let values = find_condition(14).unwrap().sample(1000, data_seed(42, 14, r)).unwrap();
                let (d_main, _) = split(&values, 0.15);
                estimate_main(&d_main, true, &hp(family, 0.15, 0.15)).unwrap().main.kind == MainKind::Mrs
            })
            .count();
        assert!(hits >= 32, "{family:?}: MRS in {hits}/40 draws");
    }
}

#[test]
fn separation_gate_turns_close_peaks_into_mrs() {
    let data = dataset(19, 1000, data_seed(42, 19, 0), Polarity::Bipolar);
    let low = estimate_profile(&data, &hp(Family::Gaussian, 0.05, 0.15)).unwrap();
    let high = estimate_profile(&data, &hp(Family::Gaussian, 0.05, 0.30)).unwrap();
    assert_eq!(low.main.kind, MainKind::BiMrs);
    assert_eq!(high.main.kind, MainKind::Mrs);
}

#[test]
fn ers_tails_prefer_the_ers_shape() {
    let values = find_condition(11).unwrap().sample(1000, 5).unwrap();
    let (_, d_sub) = split(&values, 0.15);
    let subs = estimate_subs(&d_sub, &HyperParams::default());
    let best = subs.iter().max_by(|a, b| a.fit.loglik.total_cmp(&b.fit.loglik)).unwrap();
    assert_eq!(best.shape, ShapeClass::Ers);
}

#[test]
fn profiles_are_deterministic() {
    let data = dataset(31, 500, 9, Polarity::Bipolar);
    let h = HyperParams::default();
    assert_eq!(estimate_profile(&data, &h).unwrap(), estimate_profile(&data, &h).unwrap());
}

fn case() -> impl Strategy<Value = (UserDataset, HyperParams)> {
    let ids: Vec<u32> = builtin_conditions().iter().map(|c| c.id).collect();
    (
        prop::sample::select(ids),
        100usize..400,
        any::<u64>(),
        any::<bool>(),
        prop_oneof![Just(Family::Beta), Just(Family::Gaussian)],
        0.05f64..0.45,
        0.0f64..0.5,
    )
        .prop_map(|(id, n, seed, bipolar, family, th, accept)| {
            let polarity = if bipolar { Polarity::Bipolar } else { Polarity::Unipolar };
            (dataset(id, n, seed, polarity), hp(family, th, accept))
        })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 40, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn selection_invariants((data, h) in case()) {
        let p = estimate_profile(&data, &h).unwrap();
        let d = &p.diagnostics;

        // The selected whole profile is AIC-best among everything evaluated.
        for c in &d.whole_candidates {
            prop_assert!(p.aic <= c.aic + 1e-9, "selected {} vs candidate {:?}", p.aic, c);
        }
        // The selected main model is AIC-best among the eligible ones.
        let chosen = d.main_candidates.iter().find(|c| c.kind == p.main.kind).unwrap();
        for c in d.main_candidates.iter().filter(|c| c.eligible) {
            prop_assert!(chosen.aic <= c.aic + 1e-9);
        }
        if p.main.kind == MainKind::BiMrs {
            prop_assert!(data.has_bipolar);
            prop_assert!(chosen.separation.unwrap() >= h.accept_bidist);
        }
        prop_assert_eq!(p.sub.kind == SubKind::None, p.sub.w_ade == 0.0);
        if let Some(params) = p.sub.params.filter(|_| p.sub.kind != SubKind::None) {
            let shape = ShapeClass::ALL.iter().find(|s| SubKind::from(**s) == p.sub.kind).unwrap();
            prop_assert!(shape.contains(&params));
        }
        prop_assert_eq!(d.n_main + d.n_sub, data.len());
        prop_assert!((p.aic - (2.0 * p.k as f64 - 2.0 * p.loglik)).abs() <= 1e-12 * p.aic.abs().max(1.0));
    }

    #[test]
    fn density_is_the_weighted_sum((data, h) in case(), x in 1e-4f64..(1.0 - 1e-4)) {
        let p = estimate_profile(&data, &h).unwrap();
        let main = p.main.dist().ln_pdf_unit(x).exp();
        let sub = match p.sub.params.filter(|_| p.sub.kind != SubKind::None) {
            Some(b) => b.pdf(x).unwrap(),
            None => 0.0,
        };
        let expected = p.sub.w_ade * sub + (1.0 - p.sub.w_ade) * main;
        prop_assert!((p.density(x) - expected).abs() <= 1e-12 * expected.max(1.0), "{} vs {expected}", p.density(x));
    }

    #[test]
    fn unipolar_data_never_gets_bimrs(id in prop::sample::select(vec![17u32, 18, 31, 34]), seed in any::<u64>()) {
        let data = dataset(id, 400, seed, Polarity::Unipolar);
        let p = estimate_profile(&data, &HyperParams::default()).unwrap();
        prop_assert_ne!(p.main.kind, MainKind::BiMrs);
    }

    #[test]
    fn raising_the_gate_never_creates_bimrs(
        id in prop::sample::select(vec![17u32, 18, 19, 14, 31]),
        seed in any::<u64>(),
        a in 0.0f64..0.6,
        b in 0.0f64..0.6,
    ) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let values = find_condition(id).unwrap().sample(300, seed).unwrap();
        let (d_main, _) = split(&values, 0.15);
        let at = |accept| estimate_main(&d_main, true, &hp(Family::Beta, 0.15, accept)).unwrap().main.kind;
        if at(hi) == MainKind::BiMrs {
            prop_assert_eq!(at(lo), MainKind::BiMrs);
        }
    }
}

#[test]
fn tail_floor_and_shape_are_reported() {
    let beta = BetaParams::new(0.1, 0.1).unwrap();
    assert!(ShapeClass::Ers.contains(&beta));
    assert!(estimate_subs(&[0.01, 0.99], &HyperParams::default()).is_empty());
}
