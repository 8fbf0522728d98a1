//! Cross-module flows: simulated panels through CSV and back, experiment
//! summaries as plain averages of per-replication scores, and smoke-level
//! magnitude checks on a small campaign.

use ndarray::{Array1, Array2};
use ocmt_core::data::TimeSeriesDataset;
use ocmt_core::dgp::{
    calibrate_tau_u, gen_coefficients, gen_covariates, gen_target, run_experiment,
    run_replication, BreakSchedule, CorrelationRoots, DgpConfig, FitTarget, GarchParams,
    MethodSpec, CAL_SEED,
};
use ocmt_core::downweight::{standard_grid, GridLabel};
use ocmt_core::forecast::{Protocol, SelectorSpec};
use ocmt_core::ocmt::OcmtConfig;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_cfg(replications: usize) -> DgpConfig {
    DgpConfig {
        n: 20,
        t: 100,
        dynamic: false,
        instability: false,
        fit_target: FitTarget::Low,
        replications,
        master_seed: 2024,
    }
}

fn ocmt_method() -> MethodSpec {
    MethodSpec {
        label: "ocmt".into(),
        selector: SelectorSpec::Ocmt(OcmtConfig::default()),
        protocol: Protocol::NoWeighting,
        scheme: standard_grid(GridLabel::None),
    }
}

fn simulated_dataset(cfg: &DgpConfig, seed: u64) -> TimeSeriesDataset {
    let schedule = BreakSchedule::for_config(cfg);
    let roots = CorrelationRoots::build(&schedule, cfg.n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = GarchParams::draw(cfg.n, &mut rng);
    let x = gen_covariates(cfg, &schedule, &params, &roots, &mut rng);
    let beta = gen_coefficients(cfg, &schedule, &[0.0; 4], &mut rng);
    let u: Vec<f64> = {
        use rand::Rng;
        use rand_distr::StandardNormal;
        (0..cfg.t + 1)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect()
    };
    let tau_u = calibrate_tau_u(cfg, CAL_SEED).unwrap();
    let (_, y) = gen_target(cfg, &schedule, &x, &beta, tau_u, &u);
    let t = cfg.t;
    let mut x_in = Array2::zeros((t, cfg.n));
    for i in 0..t {
        for j in 0..cfg.n {
            x_in[[i, j]] = x[[i, j]];
        }
    }
    let y_in = Array1::from_iter(y.iter().take(t).copied());
    let names = (1..=cfg.n).map(|j| format!("x{j}")).collect();
    TimeSeriesDataset::with_intercept_only(y_in, x_in, "y", names).unwrap()
}

#[test]
fn simulated_panel_survives_csv_round_trip_bitwise() {
    let cfg = small_cfg(1);
    let ds = simulated_dataset(&cfg, 77);
    let dir = std::env::temp_dir().join("ocmt_pipeline_roundtrip");
    std::fs::create_dir_all(&dir).unwrap();
    let path = dir.join("panel.csv");
    ocmt_core::data::save_csv(&ds, &path).unwrap();
    let loaded = ocmt_core::data::load_csv(&path, "y", &[], true).unwrap();
    assert_eq!(loaded.t_len(), ds.t_len());
    assert_eq!(loaded.n_covariates(), ds.n_covariates());
    for i in 0..ds.t_len() {
        assert_eq!(loaded.y[i].to_bits(), ds.y[i].to_bits());
        for j in 0..ds.n_covariates() {
            assert_eq!(loaded.x[[i, j]].to_bits(), ds.x[[i, j]].to_bits());
        }
    }
    assert_eq!(loaded.x_names, ds.x_names);
    std::fs::remove_file(&path).ok();
}

#[test]
fn summary_is_the_mean_of_replication_scores() {
    let cfg = small_cfg(6);
    let methods = vec![ocmt_method()];
    let summary = run_experiment(&cfg, &methods).unwrap();
    assert!(summary.failures.is_empty());
    assert_eq!(summary.cells[0].successes, 6);
    let mut k = 0.0;
    let mut tpr = 0.0;
    let mut fpr = 0.0;
    let mut se = 0.0;
    for rep in 0..6 {
        let scores = run_replication(&cfg, &methods, rep).unwrap();
        k += scores[0].k_hat;
        tpr += scores[0].tpr;
        fpr += scores[0].fpr;
        se += scores[0].squared_error;
    }
    let cell = &summary.cells[0];
    assert_eq!(cell.mean_k_hat.to_bits(), (k / 6.0).to_bits());
    assert_eq!(cell.mean_tpr.to_bits(), (tpr / 6.0).to_bits());
    assert_eq!(cell.mean_fpr.to_bits(), (fpr / 6.0).to_bits());
    assert_eq!(cell.msfe.to_bits(), (se / 6.0).to_bits());
}

#[test]
fn experiments_are_bit_reproducible_and_growable() {
    let cfg = small_cfg(5);
    let methods = vec![ocmt_method()];
    let a = run_experiment(&cfg, &methods).unwrap();
    let b = run_experiment(&cfg, &methods).unwrap();
    assert_eq!(a.tau_u.to_bits(), b.tau_u.to_bits());
    assert_eq!(
        a.cells[0].msfe.to_bits(),
        b.cells[0].msfe.to_bits()
    );
    assert_eq!(
        a.cells[0].mean_k_hat.to_bits(),
        b.cells[0].mean_k_hat.to_bits()
    );
    // early replications are untouched when the campaign grows
    for rep in 0..5 {
        let small = run_replication(&small_cfg(5), &methods, rep).unwrap();
        let grown = run_replication(&small_cfg(10), &methods, rep).unwrap();
        assert_eq!(
            small[0].squared_error.to_bits(),
            grown[0].squared_error.to_bits()
        );
        assert_eq!(small[0].k_hat.to_bits(), grown[0].k_hat.to_bits());
    }
}

#[test]
fn single_replication_campaign_equals_that_replication() {
    let cfg = small_cfg(1);
    let methods = vec![ocmt_method()];
    let summary = run_experiment(&cfg, &methods).unwrap();
    let single = run_replication(&cfg, &methods, 0).unwrap();
    assert_eq!(
        summary.cells[0].msfe.to_bits(),
        single[0].squared_error.to_bits()
    );
    assert_eq!(
        summary.cells[0].mean_k_hat.to_bits(),
        single[0].k_hat.to_bits()
    );
}

#[test]
fn oracle_selector_scores_perfect_rates() {
    let cfg = small_cfg(3);
    let mut mask = vec![false; cfg.n];
    for m in mask.iter_mut().take(4) {
        *m = true;
    }
    let methods = vec![MethodSpec {
        label: "oracle".into(),
        selector: SelectorSpec::Fixed(mask),
        protocol: Protocol::NoWeighting,
        scheme: standard_grid(GridLabel::None),
    }];
    let summary = run_experiment(&cfg, &methods).unwrap();
    assert_eq!(summary.cells[0].mean_tpr, 1.0);
    assert_eq!(summary.cells[0].mean_fpr, 0.0);
    assert_eq!(summary.cells[0].mean_k_hat, 4.0);
}

#[test]
fn pilot_campaign_lands_in_plausible_ranges() {
    // loose smoke bounds; the calibrated reproduction runs in the
    // acceptance suite
    let mut cfg = small_cfg(40);
    cfg.master_seed = 555;
    let methods = vec![
        ocmt_method(),
        MethodSpec {
            label: "oracle".into(),
            selector: SelectorSpec::Fixed(
                (0..cfg.n).map(|j| j < 4).collect(),
            ),
            protocol: Protocol::NoWeighting,
            scheme: standard_grid(GridLabel::None),
        },
        MethodSpec {
            label: "ocmt-light-est".into(),
            selector: SelectorSpec::Ocmt(OcmtConfig::default()),
            protocol: Protocol::SelectUnweightedEstimateWeighted,
            scheme: standard_grid(GridLabel::Light),
        },
    ];
    let summary = run_experiment(&cfg, &methods).unwrap();
    assert!(summary.failures.is_empty(), "failures: {:?}", summary.failures);
    let ocmt = &summary.cells[0];
    println!(
        "pilot ocmt: k={:.2} tpr={:.3} fpr={:.3} msfe={:.2} tau_u={:.3}",
        ocmt.mean_k_hat, ocmt.mean_tpr, ocmt.mean_fpr, ocmt.msfe, summary.tau_u
    );
    let oracle = &summary.cells[1];
    println!("pilot oracle: msfe={:.2}", oracle.msfe);
    let light = &summary.cells[2];
    println!("pilot ocmt est-weighted light: msfe={:.2}", light.msfe);
    assert!(ocmt.mean_k_hat > 3.0 && ocmt.mean_k_hat < 8.0, "k = {}", ocmt.mean_k_hat);
    assert!(ocmt.mean_tpr > 0.55, "tpr = {}", ocmt.mean_tpr);
    assert!(ocmt.mean_fpr < 0.3, "fpr = {}", ocmt.mean_fpr);
    assert!(ocmt.msfe > 10.0 && ocmt.msfe < 70.0, "msfe = {}", ocmt.msfe);
    assert!(oracle.msfe > 10.0 && oracle.msfe < 50.0, "oracle msfe = {}", oracle.msfe);
    assert!(light.msfe > 10.0 && light.msfe < 80.0, "light msfe = {}", light.msfe);
}
