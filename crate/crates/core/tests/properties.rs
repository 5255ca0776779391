use fracmom_core::criterion::{criterion_factor, fit_exponential_decay, modified_distance, CriterionParams, MomentPrefactor};
use fracmom_core::localization::ids_estimate;
use fracmom_core::model::{
    ground_energy, restrict_dirichlet, BackgroundFields, DisorderLaw, DomainMask, Ensemble, GridSpec, ModelEnsemble,
    SingleSiteProfile,
};
use fracmom_core::moments::{MomentEstimate, MomentSummary, Workers};
use fracmom_core::resolvent::{block_operator_norm, IndicatorSet, SolverOptions, SpectralShift};
use proptest::prelude::*;

fn ensemble(l: f64, lambda: f64, b: f64) -> ModelEnsemble<f64> {
    let dims = if b == 0.0 { vec![l] } else { vec![l, 4.0] };
    let g = GridSpec::new(dims.clone(), 0.5).unwrap();
    let bg = if b == 0.0 {
        BackgroundFields::free()
    } else {
        BackgroundFields::free().uniform_magnetic_field(b, vec![l / 2.0, 2.0])
    };
    let law = DisorderLaw::uniform_on(&g, lambda).unwrap();
    ModelEnsemble::new(g, &bg, SingleSiteProfile::indicator(1.0), law).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn assembled_operator_is_hermitian(l in 4usize..12, lambda in 0.0f64..5.0, b in -1.0f64..1.0, seed in any::<u64>()) {
        let ens = ensemble(l as f64, lambda, b);
        prop_assert!(ens.realize(seed).unwrap().is_hermitian());
    }

    #[test]
    fn block_norm_bounded_and_monotone(seed in any::<u64>(), e in -2.0f64..10.0, eps in 1e-3f64..2.0, c in 2.0f64..8.0) {
        let ens = ensemble(10.0, 2.0, 0.0);
        let h = ens.realize(seed).unwrap();
        let g = ens.grid();
        let z = SpectralShift::new(e, eps).unwrap();
        let x = IndicatorSet::ball(g, &[c], 1.0);
        let y = IndicatorSet::ball(g, &[5.0], 1.0);
        let y_big = IndicatorSet::ball(g, &[5.0], 2.0);
        let opts = SolverOptions::default();
        let small = block_operator_norm(&h, z, &x, &y, opts).unwrap();
        let big = block_operator_norm(&h, z, &x, &y_big, opts).unwrap();
        prop_assert!(small <= (1.0 + 1e-10) / eps);
        prop_assert!(big >= small * (1.0 - 1e-10));
    }

    #[test]
    fn block_norm_symmetric_without_field(seed in any::<u64>(), e in 0.0f64..6.0, a in 1.0f64..4.0, b in 5.0f64..9.0) {
        let ens = ensemble(10.0, 1.0, 0.0);
        let h = ens.realize(seed).unwrap();
        let g = ens.grid();
        let x = IndicatorSet::ball(g, &[a], 1.0);
        let y = IndicatorSet::ball(g, &[b], 1.0);
        let z = SpectralShift::new(e, 0.1).unwrap();
        let opts = SolverOptions::default();
        let xy = block_operator_norm(&h, z, &x, &y, opts).unwrap();
        let yx = block_operator_norm(&h, z, &y, &x, opts).unwrap();
        prop_assert!((xy - yx).abs() <= 1e-9 * xy.max(1e-300));
    }

    #[test]
    fn modified_distance_never_exceeds_euclidean(x in 0.3f64..9.7, y in 0.3f64..9.7, hole in 0usize..19) {
        let g = GridSpec::new(vec![10.0], 0.5).unwrap();
        let full = DomainMask::full(g.len());
        let d = modified_distance(&[x], &[y], &full, &g).unwrap();
        prop_assert!(d <= (x - y).abs() + 1e-15);
        prop_assert_eq!(d, modified_distance(&[y], &[x], &full, &g).unwrap());
        let mask = DomainMask::from_predicate(g.len(), |i| i != hole);
        if let Ok(a) = modified_distance(&[x], &[y], &mask, &g) {
            prop_assert!(a <= d + 1e-15);
        }
    }

    #[test]
    fn dirichlet_restriction_raises_ground_energy(seed in any::<u64>(), lo in 0usize..6, len in 4usize..10) {
        let ens = ensemble(10.0, 3.0, 0.0);
        let h = ens.realize(seed).unwrap();
        let mask = DomainMask::from_predicate(h.grid().len(), |i| i >= lo && i < lo + len);
        let sub = restrict_dirichlet(&h, &mask).unwrap();
        prop_assert!(ground_energy(&sub).unwrap() >= ground_energy(&h).unwrap() - 1e-9);
    }

    #[test]
    fn moments_of_small_samples_decrease_in_s(v in proptest::collection::vec(1e-6f64..1.0, 1..20), s1 in 0.05f64..0.5, ds in 0.01f64..0.45) {
        let a = MomentSummary::of_powers(&v, s1).unwrap().mean;
        let b = MomentSummary::of_powers(&v, s1 + ds).unwrap().mean;
        prop_assert!(b <= a * (1.0 + 1e-12));
    }

    #[test]
    fn estimate_serde_round_trip(mean in 0.0f64..1e3, stderr in 0.0f64..10.0, seed in any::<u64>(), n in 1usize..10000) {
        let est = MomentEstimate { s: 0.3, energy: 1.5, eps: 1e-4, x: vec![1.0], y: vec![2.0, 3.0], samples: n, mean, stderr, min: 0.0, max: mean, seed };
        let text = serde_json::to_string(&est).unwrap();
        let back: MomentEstimate<f64> = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, est);
    }

    #[test]
    fn criterion_increasing_in_raw_moment(raw in 1e-20f64..1.0, bump in 1.0001f64..3.0, d in 1usize..4) {
        let p = CriterionParams { s: 0.2, lambda: 3.0, energy: 0.5, e0: 0.0, l: 30.0, r: 1.0, d, raw_moment: raw, prefactor: MomentPrefactor::default() };
        let a = criterion_factor(&p).unwrap().factor;
        let b = criterion_factor(&CriterionParams { raw_moment: raw * bump, ..p }).unwrap().factor;
        prop_assert!(b > a);
    }

    #[test]
    fn exact_exponentials_are_recovered(amp in 0.1f64..100.0, mu in -1.0f64..3.0) {
        let pts: Vec<(f64, f64)> = (0..8).map(|k| (k as f64 * 0.5, amp * (-mu * k as f64 * 0.5).exp())).collect();
        let fit = fit_exponential_decay(&pts).unwrap();
        prop_assert!((fit.mu - mu).abs() < 1e-9);
        prop_assert!((fit.amplitude / amp - 1.0).abs() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn ids_nondecreasing_in_energy(seed in any::<u64>(), e in 0.0f64..20.0, de in 0.0f64..5.0) {
        let ens = ensemble(12.0, 2.0, 0.0);
        let w = Workers::serial();
        let a = ids_estimate(&ens, e, 4, seed, &w).unwrap().ids;
        let b = ids_estimate(&ens, e + de, 4, seed, &w).unwrap().ids;
        prop_assert!(b >= a);
    }
}
