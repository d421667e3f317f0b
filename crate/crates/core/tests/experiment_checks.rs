use sompns::experiments::{
    estimate_snr_in, default_theta_q_grid, default_theta_sigma_grid, wilson_interval, Campaign, DictSource,
    ExperimentConfig, Precision, SignPattern, SweepOptions,
};

fn config(pattern: SignPattern, support_size: usize, mu_x: f64, m: usize, n: usize) -> ExperimentConfig {
    ExperimentConfig {
        dict_source: DictSource::Gaussian { m, n, seed: 2015 },
        sign_pattern: pattern,
        support_size,
        mu_x,
        k: 2,
        theta_q_grid: vec![45.0],
        theta_sigma_grid: vec![45.0],
        trials: 100,
        seed: 4242,
        precision: Precision::Single,
    }
}

#[test]
fn near_noiseless_snr_is_78_73_db() {
    // Sign pattern 2, |S| = 40, μ_X = 15280 on 250 × 1000 gives SNR_in ≈ 78.73 dB.
    let snr = estimate_snr_in(config(SignPattern::Independent, 40, 15280.0, 250, 1000), 2000).unwrap();
    assert!((snr - 78.73).abs() <= 0.5, "SNR_in = {snr}");
}

#[test]
fn wilson_interval_matches_textbook_values() {
    // 50/100 and 0/20 at z = 1.96.
    let (lo, hi) = wilson_interval(50, 100);
    assert!((lo - 0.4038).abs() < 1e-4 && (hi - 0.5962).abs() < 1e-4, "{lo} {hi}");
    let (lo, hi) = wilson_interval(0, 20);
    assert_eq!(lo, 0.0);
    assert!((hi - 0.1611).abs() < 1e-4, "{hi}");
}

#[test]
fn equal_noise_makes_the_grid_symmetric() {
    // Sign pattern 1 gives identical columns, so with σ₁ = σ₂ swapping q₁ and q₂
    // leaves the failure probability unchanged.
    let mut cfg = config(SignPattern::Shared, 4, 1.2, 40, 120);
    cfg.theta_q_grid = vec![20.0, 70.0];
    cfg.trials = 3000;
    let campaign = Campaign::new(cfg).unwrap();
    let mu = campaign.calibrate_mu_x(0.5, 45.0, 45.0, 500, 6).unwrap().mu_x;
    let summary = campaign.with_mu_x(mu).unwrap().angle_sweep(&SweepOptions::default()).unwrap();
    let (a, b) = (summary.cell(20.0, 45.0).unwrap(), summary.cell(70.0, 45.0).unwrap());
    let pooled = (a.failure_rate + b.failure_rate) / 2.0;
    let se = (2.0 * pooled * (1.0 - pooled) / 3000.0).sqrt();
    assert!((a.failure_rate - b.failure_rate).abs() <= 4.0 * se, "{} vs {}", a.failure_rate, b.failure_rate);
    assert!(pooled > 0.05 && pooled < 0.95, "uninformative failure rate {pooled}");
}

#[test]
fn config_file_round_trip_and_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.toml");
    std::fs::write(
        &path,
        "sign_pattern = 2\nsupport_size = 10\nmu_x = 2.28\nK = 2\ntrials = 16000\nseed = 1\n\n\
         [dict_source]\nkind = \"gaussian\"\nm = 250\nn = 1000\nseed = 3\n",
    )
    .unwrap();
    let cfg = ExperimentConfig::load(&path).unwrap();
    assert_eq!(cfg.theta_q_grid, default_theta_q_grid());
    assert_eq!(cfg.theta_sigma_grid, default_theta_sigma_grid());
    assert_eq!(cfg.precision, Precision::Single);
    assert_eq!(ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap(), cfg);
    assert_eq!(cfg.checksum(), ExperimentConfig::from_toml_str(&cfg.to_toml()).unwrap().checksum());
}

#[test]
fn file_dictionary_source_matches_generated() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let generated = config(SignPattern::Shared, 3, 1.5, 20, 50);
    let dict = generated.dict_source.load().unwrap();
    dict.save(&path).unwrap();
    let mut from_file = generated.clone();
    from_file.dict_source = DictSource::File { path };
    let a = Campaign::new(generated).unwrap().angle_sweep(&SweepOptions::default()).unwrap();
    let b = Campaign::new(from_file).unwrap().angle_sweep(&SweepOptions::default()).unwrap();
    assert_eq!(a.dict_checksum, b.dict_checksum);
    assert_eq!(a.cells, b.cells);
}

#[test]
fn double_precision_agrees_with_single_on_a_sweep() {
    let mut cfg = config(SignPattern::Independent, 3, 1.5, 30, 80);
    cfg.theta_q_grid = vec![30.0, 60.0];
    cfg.trials = 400;
    let single = Campaign::new(cfg.clone()).unwrap().angle_sweep(&SweepOptions::default()).unwrap();
    cfg.precision = Precision::Double;
    let double = Campaign::new(cfg).unwrap().angle_sweep(&SweepOptions::default()).unwrap();
    for (a, b) in single.cells.iter().zip(&double.cells) {
        assert!((a.successes as i64 - b.successes as i64).abs() <= 2, "{a:?} {b:?}");
    }
}
