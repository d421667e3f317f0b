//! Acceptance suite. Each test prints one `PASS`/`FAIL` line (written straight
//! to stdout so it shows without `--nocapture`) and then asserts.

use std::io::Write;

use nalgebra::DMatrix;
use sompns::bounds::validation::{single_atom_tail, union_tail};
use sompns::bounds::{optimal_weights, NoiseSpec};
use sompns::dictionary::{Dictionary, DEFAULT_RIC_BUDGET};
use sompns::experiments::{
    estimate_snr_in, fit_conjecture_params, generate_sparse_signal, default_theta_q_grid, random_support, Campaign,
    DictSource, ExperimentConfig, Precision, SignPattern, SweepOptions,
};
use sompns::recovery::{project_residual, somp, somp_ns, somp_ns_prescaled, WeightVector};
use sompns::rng::{from_seed, mix};
use sompns::Support;
use rand::Rng;

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[criterion {id}] {verdict} {name}: {detail}").unwrap();
    out.flush().unwrap();
}

fn full_scale_config(pattern: SignPattern, support_size: usize, mu_x: f64) -> ExperimentConfig {
    ExperimentConfig {
        dict_source: DictSource::Gaussian { m: 250, n: 1000, seed: 2015 },
        sign_pattern: pattern,
        support_size,
        mu_x,
        k: 2,
        theta_q_grid: vec![45.0],
        theta_sigma_grid: vec![45.0],
        trials: 2000,
        seed: 20_150_101,
        precision: Precision::Single,
    }
}

fn desk_config(support_size: usize, theta_sigma_grid: Vec<f64>, trials: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        dict_source: DictSource::Gaussian { m: 64, n: 256, seed: 7 },
        sign_pattern: SignPattern::Shared,
        support_size,
        mu_x: 1.0,
        k: 2,
        theta_q_grid: default_theta_q_grid(),
        theta_sigma_grid,
        trials,
        seed,
        precision: Precision::Single,
    }
}

#[test]
fn criterion_1_input_snr_matches_targets() {
    let tol = 0.15;
    let cases = 10_000;
    let c1 = estimate_snr_in(full_scale_config(SignPattern::Shared, 10, 2.28), cases).unwrap();
    let c4 = estimate_snr_in(full_scale_config(SignPattern::Independent, 10, 2.50), cases).unwrap();
    let pass = (c1 - 1.51).abs() <= tol && (c4 - 1.76).abs() <= tol;
    report(
        1,
        "input SNR (m=250, n=1000, 1e4 cases)",
        pass,
        &format!("pattern 1, μ_X=2.28: {c1:.3} dB (target 1.51 ± {tol}); pattern 2, μ_X=2.50: {c4:.3} dB (target 1.76 ± {tol})"),
    );
    assert!(pass);
}

/// Noiseless instances on one dictionary: `(instances with ERC < 1, failures
/// among them, recoveries among the rest)`.
fn noiseless_erc_ensemble(m: usize, n: usize, s: usize, instances: u64, seed: u64) -> (u32, u32, u32) {
    let dict = Dictionary::gaussian(m, n, seed).unwrap();
    let (mut qualifying, mut failures, mut recovered_other) = (0, 0, 0);
    for i in 0..instances {
        let trial = mix(seed, &[i]);
        let support = random_support(n, s, mix(trial, &[0])).unwrap();
        let pattern = if i % 2 == 0 { SignPattern::Shared } else { SignPattern::Independent };
        let x = generate_sparse_signal(n, &support, 1.0, pattern, 2, mix(trial, &[1])).unwrap();
        let y = dict.atoms() * &x;
        let erc = dict.erc_constant(&support).unwrap();
        let ok = somp_ns(dict.atoms(), &y, &WeightVector::ones(2), s)
            .map(|t| support.same_set(&t.selected))
            .unwrap_or(false);
        if erc < 1.0 {
            qualifying += 1;
            failures += (!ok) as u32;
        } else {
            recovered_other += ok as u32;
        }
    }
    (qualifying, failures, recovered_other)
}

#[test]
fn criterion_2_noiseless_recovery_under_erc() {
    // At |S| = 8 a 64×256 Gaussian dictionary essentially never has ERC < 1,
    // so the same dimensions with |S| = 3 supply instances the guarantee covers.
    let (q8, f8, r8) = noiseless_erc_ensemble(64, 256, 8, 500, 31);
    let (q3, f3, r3) = noiseless_erc_ensemble(64, 256, 3, 500, 32);
    let pass = f8 == 0 && f3 == 0 && q3 > 0;
    let vacuous = if q8 == 0 { " (vacuous)" } else { "" };
    report(
        2,
        "noiseless recovery whenever ERC < 1 (500 instances each, m=64, n=256)",
        pass,
        &format!(
            "|S|=8: {q8} with ERC < 1{vacuous}, {f8} failures, {r8}/{} others recovered; \
             |S|=3: {q3} with ERC < 1, {f3} failures, {r3}/{} others recovered",
            500 - q8,
            500 - q3
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_3_optimal_weights_beat_equal_weights() {
    let theta_sigma = 20.0;
    let camp = Campaign::new(desk_config(8, vec![theta_sigma], 2000, 11)).unwrap();
    let cal = camp.calibrate_mu_x(0.2, 45.0, 45.0, 1000, 8).unwrap();
    let camp = camp.with_mu_x(cal.mu_x).unwrap();
    let summary = camp.angle_sweep(&SweepOptions::default()).unwrap();
    let theta_opt = optimal_weights(&NoiseSpec::from_angle_deg(theta_sigma).unwrap()).theta_deg().unwrap();
    let nearest = default_theta_q_grid()
        .into_iter()
        .min_by(|a, b| (a - theta_opt).abs().total_cmp(&(b - theta_opt).abs()))
        .unwrap();
    let best = summary.cell(nearest, theta_sigma).unwrap();
    let equal = summary.cell(45.0, theta_sigma).unwrap();
    let pass = best.failure_rate < equal.failure_rate && best.wilson_hi < equal.wilson_lo;
    report(
        3,
        "weighting benefit at θσ=20° (m=64, n=256, |S|=8, 2000 trials/cell)",
        pass,
        &format!(
            "μ_X={:.4} (success {:.3} at 45°/45°); θq={nearest}° (optimum {theta_opt:.2}°) fail {:.4} [{:.4}, {:.4}] vs θq=45° fail {:.4} [{:.4}, {:.4}]",
            cal.mu_x,
            cal.success_rate,
            best.failure_rate,
            best.wilson_lo,
            best.wilson_hi,
            equal.failure_rate,
            equal.wilson_lo,
            equal.wilson_hi
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_best_weight_angle_follows_formula() {
    let grid = default_theta_q_grid();
    let step = grid[1] - grid[0];
    // Paired draws along each row; the flat optimum at 45° needs a larger sample.
    let opts = SweepOptions { shared_draws: true, ..Default::default() };
    let base = Campaign::new(desk_config(4, vec![25.0, 65.0], 10_000, 13)).unwrap();
    let cal = base.calibrate_mu_x(0.5, 45.0, 45.0, 2000, 8).unwrap();
    let sides = base.with_mu_x(cal.mu_x).unwrap().angle_sweep(&opts).unwrap();
    let center = Campaign::new(desk_config(4, vec![45.0], 100_000, 13).with_mu_x(cal.mu_x))
        .unwrap()
        .angle_sweep(&opts)
        .unwrap();

    let mut pass = true;
    let mut parts = vec![format!("μ_X={:.4}", cal.mu_x)];
    for (summary, theta_sigma) in [(&sides, 25.0), (&center, 45.0), (&sides, 65.0)] {
        let target = optimal_weights(&NoiseSpec::from_angle_deg(theta_sigma).unwrap()).theta_deg().unwrap();
        let best = summary.best_theta_q(theta_sigma).unwrap();
        let ok = (best - target).abs() <= step + 1e-9 && (theta_sigma != 45.0 || best == 45.0);
        pass &= ok;
        parts.push(format!("θσ={theta_sigma}°: best θq={best}° vs formula {target:.2}°"));
    }
    report(4, "best θq within one grid step of arctan(cot²θσ) (m=64, n=256, |S|=4)", pass, &parts.join("; "));
    assert!(pass);
}

#[test]
fn criterion_5_failure_rate_log_linear_in_k() {
    // At |S| = 3 noiseless failures are near zero, so noise drives the failure rate.
    let camp = Campaign::new(desk_config(3, vec![45.0], 4000, 17)).unwrap();
    let cal = camp.calibrate_mu_x(0.2, 45.0, 45.0, 2000, 8).unwrap();
    let camp = camp.with_mu_x(cal.mu_x).unwrap();
    let noiseless = camp.k_sweep(&[1], &SweepOptions { noise_scale: 0.0, ..Default::default() }).unwrap();
    let ks: Vec<usize> = (1..=8).collect();
    let sweep = camp.k_sweep(&ks, &SweepOptions::default()).unwrap();
    let fit = fit_conjecture_params(&sweep.rows, 3, 5);
    let (pass, detail) = match &fit {
        Ok(f) => (
            f.fit.slope < 0.0 && f.fit.r_squared >= 0.9,
            format!(
                "μ_X={:.4}, noiseless failures {}/{}; K used {:?}; slope {:.4}, R² {:.4}; failures {:?}",
                cal.mu_x,
                noiseless.rows[0].failures,
                noiseless.rows[0].trials,
                f.ks_used,
                f.fit.slope,
                f.fit.r_squared,
                sweep.rows.iter().map(|r| r.failures).collect::<Vec<_>>()
            ),
        ),
        Err(e) => (false, e.to_string()),
    };
    report(5, "semi-log linearity of failure rate in K (equal weights, σ=(√2/2)·1)", pass, &detail);
    assert!(pass);
}

#[test]
fn criterion_6_concentration_inequalities() {
    let settings = [
        (vec![1.0, 1.0], vec![1.0, 1.0]),
        (vec![30f64.to_radians().cos(), 30f64.to_radians().sin()], vec![0.3, 1.2]),
        (vec![1.0, 2.0, 0.5], vec![0.5, 1.0, 2.0]),
    ];
    let mults = [0.5, 1.0, 2.0];
    let draws = 100_000;
    let dict = Dictionary::gaussian(16, 4, 3).unwrap();
    let mut pass = true;
    let mut worst: f64 = f64::NEG_INFINITY;
    let mut checks = 0;
    for (i, (q, s)) in settings.iter().enumerate() {
        let q = WeightVector::new(q.clone()).unwrap();
        let s = NoiseSpec::new(s.clone()).unwrap();
        let single = single_atom_tail(&q, &s, 16, &mults, draws, mix(1, &[i as u64])).unwrap();
        let union = union_tail(&dict, &q, &s, &mults, draws, mix(2, &[i as u64])).unwrap();
        for c in single.iter().chain(&union) {
            pass &= c.passed;
            checks += 1;
            if c.std_error > 0.0 {
                worst = worst.max((c.empirical - c.bound) / c.std_error);
            }
        }
    }
    report(
        6,
        "single-atom and union tail bounds (1e5 draws, 3 settings, ε ∈ {0.5,1,2}·‖qσ‖₂)",
        pass,
        &format!("{checks} checks; largest (empirical − bound)/SE = {worst:.2}, allowed 3"),
    );
    assert!(pass);
}

#[test]
fn criterion_7_structural_invariants() {
    let mut failures: Vec<String> = Vec::new();
    let mut rng = from_seed(99);
    for i in 0..50u64 {
        let (m, n, k, s) = (24, 60, 3, 5);
        let dict = Dictionary::gaussian(m, n, mix(5, &[i])).unwrap();
        let y = DMatrix::from_fn(m, k, |_, _| rng.random::<f64>() - 0.5);
        let q = WeightVector::new((0..k).map(|_| rng.random::<f64>() + 0.05).collect()).unwrap();

        let a = somp(dict.atoms(), &y, s).unwrap();
        let b = somp_ns(dict.atoms(), &y, &WeightVector::ones(k), s).unwrap();
        if a != b {
            failures.push(format!("equal-weights reduction, instance {i}"));
        }
        let f1 = somp_ns(dict.atoms(), &y, &q, s).unwrap();
        let f2 = somp_ns_prescaled(dict.atoms(), &y, &q, s).unwrap();
        if f1.selected != f2.selected {
            failures.push(format!("form equivalence, instance {i}"));
        }
        let c = 0.1 + 10.0 * rng.random::<f64>();
        let scaled = somp_ns(dict.atoms(), &y, &q.scaled(c).unwrap(), s).unwrap();
        if scaled.selected != f1.selected {
            failures.push(format!("weight-scale invariance, instance {i}"));
        }
        let support = Support::new(f1.selected.clone(), n).unwrap();
        let r = project_residual(dict.atoms(), &support, &y).unwrap();
        let orth = support
            .as_slice()
            .iter()
            .map(|&j| (dict.atoms().column(j).transpose() * &r).iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        if orth > 1e-5 * y.norm() {
            failures.push(format!("residual orthogonality {orth:e}, instance {i}"));
        }
        if f1.residual_norms.windows(2).any(|w| w[1] > w[0] + 1e-9) {
            failures.push(format!("monotone residual, instance {i}"));
        }
    }

    let mut tiny = 0;
    for i in 0..60u64 {
        let dict = Dictionary::gaussian(6, 9, mix(6, &[i])).unwrap();
        let mu = dict.coherence().unwrap();
        if (dict.babel(1).unwrap() - mu).abs() > 1e-12 {
            failures.push(format!("babel(1) = coherence, dictionary {i}"));
        }
        let profile = dict.babel_profile(8).unwrap();
        for (p, w) in profile.windows(2).enumerate() {
            if w[1] + 1e-15 < w[0] {
                failures.push(format!("babel monotone at p={}, dictionary {i}", p + 1));
            }
        }
        for (p, v) in profile.iter().enumerate() {
            if *v > (p + 1) as f64 * mu + 1e-12 {
                failures.push(format!("babel(p) ≤ pμ at p={}, dictionary {i}", p + 1));
            }
        }
        for s in 2..=3 {
            let bound = dict.ric_coherence_bound(s, false).unwrap();
            if !bound.vacuous {
                tiny += 1;
                let exact = dict.exact_ric(s, DEFAULT_RIC_BUDGET).unwrap();
                if exact > bound.value + 1e-12 {
                    failures.push(format!("exact RIC {exact} > bound {} (s={s}), dictionary {i}", bound.value));
                }
            }
        }
    }
    if tiny < 50 {
        failures.push(format!("only {tiny} non-vacuous RIC comparisons"));
    }
    let pass = failures.is_empty();
    report(
        7,
        "structural invariants (50 recovery instances, 60 tiny dictionaries)",
        pass,
        &if pass { format!("all held; {tiny} exact-RIC vs coherence-bound comparisons") } else { failures.join("; ") },
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_8_full_scale_smoke_cell() {
    let camp = Campaign::new(full_scale_config(SignPattern::Shared, 30, 3.19)).unwrap();
    let summary = camp.angle_sweep(&SweepOptions::default()).unwrap();
    let cell = summary.cell(45.0, 45.0).unwrap();
    let p = cell.success_rate();
    let pass = (p - 0.10).abs() <= 0.03;
    report(
        8,
        "full-scale cell (pattern 1, |S|=30, μ_X=3.19, 45°/45°, 2000 trials)",
        pass,
        &format!("success {p:.4} ({} / {}), target 0.10 ± 0.03", cell.successes, cell.trials),
    );
    assert!(pass);
}
