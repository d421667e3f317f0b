//! SOMP-NS against a naive implementation that recomputes the projection
//! from scratch with an SVD pseudo-inverse at every iteration.

use approx::assert_relative_eq;
use nalgebra::DMatrix;
use sompns::experiments::{generate_noise, generate_sparse_signal, random_support, SignPattern};
use sompns::recovery::select_atom;
use sompns::{somp_ns, somp_ns_prescaled, Dictionary, NoiseSpec, WeightVector};

fn naive_somp_ns(a: &DMatrix<f64>, y: &DMatrix<f64>, q: &[f64], s: usize) -> (Vec<usize>, Vec<f64>) {
    let mut chosen: Vec<usize> = Vec::new();
    let mut residual = y.clone();
    let mut norms = vec![y.norm()];
    for _ in 0..s {
        let mut best = (usize::MAX, -1.0);
        for j in 0..a.ncols() {
            if chosen.contains(&j) {
                continue;
            }
            let mut v = 0.0;
            for k in 0..y.ncols() {
                v += q[k] * a.column(j).dot(&residual.column(k)).abs();
            }
            if v > best.1 {
                best = (j, v);
            }
        }
        chosen.push(best.0);
        let phi = DMatrix::from_fn(a.nrows(), chosen.len(), |i, c| a[(i, chosen[c])]);
        let pinv = phi.clone().pseudo_inverse(1e-12).unwrap();
        residual = y - &phi * (pinv * y);
        norms.push(residual.norm());
    }
    (chosen, norms)
}

fn instance(m: usize, n: usize, size: usize, k: usize, seed: u64) -> (Dictionary, DMatrix<f64>) {
    let d = Dictionary::gaussian(m, n, seed).unwrap();
    let s = random_support(n, size, seed + 1).unwrap();
    let x = generate_sparse_signal(n, &s, 1.0, SignPattern::Independent, k, seed + 2).unwrap();
    let sigma: Vec<f64> = (0..k).map(|i| 0.1 + 0.2 * i as f64).collect();
    let e = generate_noise(m, &NoiseSpec::new(sigma).unwrap(), seed + 3);
    let y = d.atoms() * x + e;
    (d, y)
}

#[test]
fn matches_naive_projection_loop() {
    for seed in 0..20 {
        let (d, y) = instance(24, 60, 5, 3, 1000 * seed);
        let q = [1.0, 0.7, 0.3];
        let trace = somp_ns(d.atoms(), &y, &WeightVector::new(q.to_vec()).unwrap(), 6).unwrap();
        let (sel, norms) = naive_somp_ns(d.atoms(), &y, &q, 6);
        assert_eq!(trace.selected, sel, "seed {seed}");
        for (a, b) in trace.residual_norms.iter().zip(&norms) {
            assert_relative_eq!(*a, *b, epsilon = 1e-9 * norms[0]);
        }
    }
}

#[test]
fn final_coefficients_solve_least_squares() {
    let (d, y) = instance(30, 80, 6, 2, 77);
    let trace = somp_ns(d.atoms(), &y, &WeightVector::ones(2), 6).unwrap();
    let phi = DMatrix::from_fn(30, 6, |i, c| d.atoms()[(i, trace.selected[c])]);
    let expected = phi.clone().pseudo_inverse(1e-12).unwrap() * &y;
    assert_relative_eq!(trace.coefficients, expected, epsilon = 1e-9);
    assert_relative_eq!(trace.residual, &y - &phi * &expected, epsilon = 1e-9);
}

#[test]
fn selection_step_matches_a_plain_loop() {
    let (d, y) = instance(12, 25, 3, 2, 5);
    let q = WeightVector::new(vec![0.4, 1.3]).unwrap();
    let (j, v) = select_atom(d.atoms(), &y, &q).unwrap();
    let metric = |j: usize| 0.4 * d.atoms().column(j).dot(&y.column(0)).abs() + 1.3 * d.atoms().column(j).dot(&y.column(1)).abs();
    let best = (0..25).max_by(|&a, &b| metric(a).partial_cmp(&metric(b)).unwrap().then(b.cmp(&a))).unwrap();
    assert_eq!(j, best);
    assert_relative_eq!(v, metric(best), max_relative = 1e-12);
}

#[test]
fn both_forms_agree_and_single_precision_tracks_double() {
    for seed in 0..10 {
        let (d, y) = instance(40, 100, 6, 2, 50 + seed);
        let q = WeightVector::new(vec![0.9, 0.2]).unwrap();
        let one = somp_ns(d.atoms(), &y, &q, 6).unwrap();
        let two = somp_ns_prescaled(d.atoms(), &y, &q, 6).unwrap();
        assert_eq!(one.selected, two.selected);
        let single = somp_ns(&d.atoms().clone().cast::<f32>(), &y.clone().cast::<f32>(), &q, 6).unwrap();
        assert_eq!(single.selected, one.selected, "seed {seed}");
    }
}

#[test]
fn noiseless_full_scale_recovery() {
    let d = Dictionary::gaussian(250, 1000, 2015).unwrap();
    let mut hits = 0;
    for t in 0..100u64 {
        let s = random_support(1000, 10, 10_000 + t).unwrap();
        let x = generate_sparse_signal(1000, &s, 1.0, SignPattern::Independent, 2, 20_000 + t).unwrap();
        let y = d.atoms() * x;
        let trace = somp_ns(d.atoms(), &y, &WeightVector::ones(2), 10).unwrap();
        hits += s.same_set(&trace.selected) as usize;
    }
    assert!(hits >= 99, "{hits}/100");
}

#[test]
fn prescaled_residual_is_the_weighted_residual() {
    let (d, y) = instance(20, 50, 4, 2, 321);
    let q = WeightVector::new(vec![0.25, 3.0]).unwrap();
    let one = somp_ns(d.atoms(), &y, &q, 4).unwrap();
    let two = somp_ns_prescaled(d.atoms(), &y, &q, 4).unwrap();
    assert_eq!(one.selected, two.selected);
    for (k, qk) in q.as_slice().iter().enumerate() {
        assert_relative_eq!(two.residual.column(k).into_owned(), one.residual.column(k) * *qk, epsilon = 1e-10);
        assert_relative_eq!(two.coefficients.column(k).into_owned(), one.coefficients.column(k) * *qk, epsilon = 1e-10);
    }
}
