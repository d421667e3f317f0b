use nalgebra::DMatrix;
use proptest::prelude::*;
use sompns::experiments::{generate_noise, generate_sparse_signal, random_support, wilson_interval, SignPattern};
use sompns::recovery::project_residual;
use sompns::{somp, somp_ns, somp_ns_prescaled, Dictionary, NoiseSpec, Support, WeightVector};

fn measurements(m: usize, n: usize, k: usize, seed: u64) -> (Dictionary, DMatrix<f64>) {
    let d = Dictionary::gaussian(m, n, seed).unwrap();
    let s = random_support(n, 3, seed ^ 1).unwrap();
    let x = generate_sparse_signal(n, &s, 1.0, SignPattern::Independent, k, seed ^ 2).unwrap();
    let e = generate_noise(m, &NoiseSpec::uniform(k, 0.3).unwrap(), seed ^ 3);
    (d.clone(), d.atoms() * x + e)
}

fn weights(k: usize) -> impl Strategy<Value = WeightVector> {
    prop::collection::vec(0.05f64..5.0, k).prop_map(|q| WeightVector::new(q).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn babel_is_monotone_and_below_linear_coherence(seed in any::<u64>(), m in 3usize..12, n in 4usize..20) {
        let d = Dictionary::gaussian(m, n, seed).unwrap();
        let profile = d.babel_profile(n - 1).unwrap();
        let mu = d.coherence().unwrap();
        prop_assert_eq!(profile[0], mu);
        for p in 1..profile.len() {
            prop_assert!(profile[p] >= profile[p - 1]);
        }
        for (i, v) in profile.iter().enumerate() {
            prop_assert!(*v <= (i + 1) as f64 * mu + 1e-12);
        }
    }

    #[test]
    fn erc_ignores_support_order(seed in any::<u64>(), rot in 0usize..4) {
        let d = Dictionary::gaussian(12, 30, seed).unwrap();
        let s = random_support(30, 4, seed ^ 9).unwrap();
        let mut idx = s.as_slice().to_vec();
        idx.rotate_left(rot);
        idx.swap(0, 1);
        let t = Support::new(idx, 30).unwrap();
        let (a, b) = (d.erc_constant(&s).unwrap(), d.erc_constant(&t).unwrap());
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1.0));
    }

    #[test]
    fn equal_weights_reduce_to_somp(seed in any::<u64>(), c in 0.1f64..10.0) {
        let (d, y) = measurements(16, 40, 3, seed);
        let plain = somp(d.atoms(), &y, 4).unwrap();
        let weighted = somp_ns(d.atoms(), &y, &WeightVector::new(vec![c; 3]).unwrap(), 4).unwrap();
        prop_assert_eq!(plain.selected, weighted.selected);
    }

    #[test]
    fn both_forms_select_the_same_atoms(seed in any::<u64>(), q in weights(3)) {
        let (d, y) = measurements(16, 40, 3, seed);
        let a = somp_ns(d.atoms(), &y, &q, 4).unwrap();
        let b = somp_ns_prescaled(d.atoms(), &y, &q, 4).unwrap();
        prop_assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn weight_scale_does_not_change_selection(seed in any::<u64>(), q in weights(2), c in 1e-3f64..1e3) {
        let (d, y) = measurements(16, 40, 2, seed);
        let a = somp_ns(d.atoms(), &y, &q, 4).unwrap();
        let b = somp_ns(d.atoms(), &y, &q.scaled(c).unwrap(), 4).unwrap();
        prop_assert_eq!(a.selected, b.selected);
    }

    #[test]
    fn residual_is_orthogonal_and_shrinks(seed in any::<u64>(), q in weights(2), s in 1usize..8) {
        let (d, y) = measurements(20, 50, 2, seed);
        let trace = somp_ns(d.atoms(), &y, &q, s).unwrap();
        let chosen = DMatrix::from_fn(20, s, |i, c| d.atoms()[(i, trace.selected[c])]);
        let leak = (chosen.transpose() * &trace.residual).abs().max();
        prop_assert!(leak <= 1e-10 * y.norm());
        for w in trace.residual_norms.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12));
        }
    }

    #[test]
    fn projection_is_idempotent(seed in any::<u64>(), size in 1usize..6) {
        let (d, y) = measurements(12, 30, 2, seed);
        let s = random_support(30, size, seed ^ 5).unwrap();
        let once = project_residual(d.atoms(), &s, &y).unwrap();
        let twice = project_residual(d.atoms(), &s, &once).unwrap();
        prop_assert!((&once - &twice).norm() <= 1e-10 * y.norm());
    }

    #[test]
    fn angles_round_trip(theta in 0.5f64..89.5) {
        let q = WeightVector::from_angle_deg(theta).unwrap();
        let s = NoiseSpec::from_angle_deg(theta).unwrap();
        prop_assert!((q.theta_deg().unwrap() - theta).abs() < 1e-9);
        prop_assert!((s.theta_deg().unwrap() - theta).abs() < 1e-9);
    }

    #[test]
    fn one_based_support_round_trips(idx in prop::collection::btree_set(0usize..50, 1..10)) {
        let s = Support::new(idx.into_iter().collect(), 50).unwrap();
        let text: Vec<String> = s.to_one_based().iter().map(|i| i.to_string()).collect();
        prop_assert_eq!(Support::parse_one_based(&text.join(","), 50).unwrap(), s);
    }

    #[test]
    fn wilson_interval_brackets_the_rate(trials in 1u64..5000, frac in 0.0f64..=1.0) {
        let hits = (frac * trials as f64).floor() as u64;
        let (lo, hi) = wilson_interval(hits, trials);
        let p = hits as f64 / trials as f64;
        prop_assert!(0.0 <= lo && lo <= p + 1e-12 && p <= hi + 1e-12 && hi <= 1.0);
    }
}
