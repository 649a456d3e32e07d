use noma_isac::linalg::{outer, CMatrix};
use noma_isac::metrics::{beampattern_power, noma_rates_cov, sdma_rates_cov, CovarianceSet};
use noma_isac::optimizer::{
    build_subproblem, check_beamformers, check_constraints, initialize_feasible, inner_loop, surrogate_rate,
    IterationState,
};
use noma_isac::scene::{steering_vector, ArrayGeometry};
use noma_isac::{Error, ScenarioConfig, Scene, Scheme, SolveStatus, SolverConfig};
use num_complex::Complex64;

fn reference_scene(n_users: usize, t: f64, seed: u64) -> Scene {
    Scene::generate(ScenarioConfig::reference(n_users, t, 10.0, 1.0), seed).unwrap()
}

fn assert_monotone_inner_loops(trace: &[noma_isac::optimizer::TraceEntry]) {
    for pair in trace.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.inner == 0 {
            continue;
        }
        assert!(
            b.objective >= a.objective - 1e-6 * a.objective.abs(),
            "objective dropped from {} to {} (outer {}, inner {})",
            a.objective,
            b.objective,
            b.outer,
            b.inner
        );
    }
}

#[test]
fn sense_only_single_target_reaches_full_array_gain() {
    let mut cfg = ScenarioConfig::reference(1, 0.0, 0.0, 1.0);
    cfg.target_angles_deg = vec![40.0];
    let scene = Scene::generate(cfg, 1).unwrap();
    let report = noma_isac::solve(&scene, &SolverConfig::default(), Scheme::SenseOnly).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    // N * P_t = 400 mW
    assert!(report.radar.beampattern_mw[0] >= 396.0, "{:?}", report.radar);
    assert!(report.radar.beampattern_mw[0] <= 400.0 + 1e-6);
}

#[test]
fn comm_only_single_user_matches_equal_gain_transmission() {
    for seed in [1, 7] {
        let scene = reference_scene(1, 0.0, seed);
        let report = noma_isac::solve(&scene, &SolverConfig::default(), Scheme::CommOnly).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        let h = &scene.channels.channels[0];
        let n = h.len() as f64;
        let l1: f64 = h.iter().map(|x| x.norm()).sum();
        let optimum = (1.0 + scene.config.total_power_mw / n * l1 * l1).log2();
        assert!(
            (report.rates[0] - optimum).abs() <= 0.01 * optimum,
            "{} vs {optimum}",
            report.rates[0]
        );
    }
}

#[test]
fn overloaded_reference_converges_monotonically() {
    let scene = reference_scene(6, 0.0, 1);
    let report = noma_isac::solve(&scene, &SolverConfig::default(), Scheme::Noma).unwrap();
    assert_eq!(report.status, SolveStatus::Converged);
    assert!(report.penalty_residual <= 1e-4);
    assert!(report.outer_iterations <= 30);
    assert_monotone_inner_loops(&report.trace);
    assert!(report.trace.iter().all(|t| t.penalty >= -1e-9));
}

#[test]
fn extracted_solutions_meet_every_constraint() {
    for (k, seed) in [(2, 3), (2, 4), (6, 5)] {
        for scheme in [Scheme::Noma, Scheme::Sdma] {
            let scene = reference_scene(k, 0.5, seed);
            let report = noma_isac::solve(&scene, &SolverConfig::default(), scheme).unwrap();
            assert_eq!(report.status, SolveStatus::Converged);
            let c = check_beamformers(&scene, scheme, &report.beamformers).unwrap();
            assert!(c.rate_shortfall <= 1e-3, "{c:?}");
            assert!(c.per_antenna_rel_dev <= 1e-3, "{c:?}");
            assert!(c.power_diff_excess <= 1e-6, "{c:?}");
            assert!(c.crosscorr_excess <= 1e-6, "{c:?}");
            // the covariances themselves meet the per-antenna equality tightly
            let c = check_constraints(&scene, scheme, &report.covariances).unwrap();
            assert!(c.per_antenna_rel_dev <= 1e-5, "{c:?}");
            // extracted rates agree with the general-rank rates
            let general = match scheme {
                Scheme::Sdma => sdma_rates_cov(&report.covariances, &scene.channels.channels, 1.0).unwrap(),
                _ => noma_rates_cov(&report.covariances, &scene.channels.channels, 1.0).unwrap(),
            };
            for (a, b) in general.iter().zip(&report.rates) {
                assert!((a - b).abs() <= 0.01 * a.abs(), "{general:?} vs {:?}", report.rates);
            }
        }
    }
}

#[test]
fn inner_loops_are_monotone_over_random_scenes() {
    for seed in 0..20u64 {
        let k = if seed % 2 == 0 { 2 } else { 6 };
        let scheme = if seed % 3 == 0 { Scheme::Sdma } else { Scheme::Noma };
        let scene = Scene::generate(ScenarioConfig::reference(k, 0.3, 2.0, 1.0), 100 + seed).unwrap();
        match noma_isac::solve(&scene, &SolverConfig::default(), scheme) {
            Ok(report) => assert_monotone_inner_loops(&report.trace),
            Err(Error::Infeasible(_)) => {}
            Err(e) => panic!("seed {seed}: {e}"),
        }
    }
}

#[test]
fn single_user_noma_and_sdma_coincide() {
    let scene = reference_scene(1, 0.0, 2);
    let cfg = SolverConfig::default();
    let noma = noma_isac::solve(&scene, &cfg, Scheme::Noma).unwrap();
    let sdma = noma_isac::solve(&scene, &cfg, Scheme::Sdma).unwrap();
    assert!((noma.objective - sdma.objective).abs() <= 1e-6 * noma.objective.abs());
}

#[test]
fn impossible_rate_target_is_infeasible() {
    let mut cfg = ScenarioConfig::reference(2, 0.0, 1.0, 1.0);
    cfg.min_rate_bpshz = vec![1000.0, 1000.0];
    let scene = Scene::generate(cfg, 1).unwrap();
    match noma_isac::solve(&scene, &SolverConfig::default(), Scheme::Noma) {
        Err(Error::Infeasible(_)) => {}
        other => panic!("expected infeasible, got {other:?}"),
    }
}

#[test]
fn array_steered_covariance_is_a_feasible_start() {
    let mut cfg = ScenarioConfig::reference(1, 0.0, 1.0, 1.0);
    cfg.target_angles_deg = vec![30.0];
    cfg.min_rate_bpshz = vec![0.0];
    let scene = Scene::generate(cfg, 1).unwrap();
    let a = steering_vector(30.0, &ArrayGeometry::half_wavelength(4)).unwrap();
    let w0 = CovarianceSet {
        matrices: vec![outer(&a, &a) * Complex64::new(25.0, 0.0)],
    };
    let c = check_constraints(&scene, Scheme::Noma, &w0).unwrap();
    assert_eq!(c.per_antenna_rel_dev, 0.0);
    assert!(c.rate_shortfall <= 0.0);
    assert!(c.power_diff_excess <= 0.0 && c.crosscorr_excess <= 0.0);
    assert!(initialize_feasible(&scene, Scheme::Noma, &SolverConfig::default()).is_ok());
}

#[test]
fn feasibility_program_start_meets_the_constraints() {
    let scene = reference_scene(2, 0.0, 1);
    for scheme in Scheme::ALL {
        let w0 = initialize_feasible(&scene, scheme, &SolverConfig::default()).unwrap();
        let c = check_constraints(&scene, scheme, &w0).unwrap();
        assert!(c.rate_shortfall <= 1e-6, "{scheme}: {c:?}");
        assert!(c.per_antenna_rel_dev <= 1e-6, "{scheme}: {c:?}");
        assert!(
            c.power_diff_excess <= 0.0 && c.crosscorr_excess <= 0.0,
            "{scheme}: {c:?}"
        );
        assert!(c.min_eigenvalue >= -1e-6, "{scheme}: {c:?}");
    }
}

#[test]
fn subproblem_census_for_reference_noma() {
    let scene = reference_scene(2, 0.0, 1);
    let cfg = SolverConfig::default();
    let w0 = initialize_feasible(&scene, Scheme::Noma, &cfg).unwrap();
    let census = build_subproblem(&scene, &w0, 1e5, Scheme::Noma, &cfg)
        .unwrap()
        .program
        .census();
    assert_eq!(census.equalities, 4);
    // 2 beampattern-balance rows + 2 minimum-rate rows
    assert_eq!(census.inequalities, 4);
    assert_eq!(census.second_order, 1);
    assert_eq!(census.log_epigraph, 3);
    assert_eq!(census.psd_blocks, 2);
}

#[test]
fn comm_only_objective_ignores_radar_weight() {
    let mut scene = reference_scene(2, 0.0, 1);
    let cfg = SolverConfig::default();
    let w0 = initialize_feasible(&scene, Scheme::CommOnly, &cfg).unwrap();
    let a = build_subproblem(&scene, &w0, 1e3, Scheme::CommOnly, &cfg).unwrap();
    scene.config.weight_radar = 50.0;
    let b = build_subproblem(&scene, &w0, 1e3, Scheme::CommOnly, &cfg).unwrap();
    assert_eq!(a.program.objective(), b.program.objective());
    assert_eq!(a.program.census().second_order, 0);
}

#[test]
fn expansion_point_is_feasible_for_its_subproblem() {
    let cfg = SolverConfig::default();
    for (k, scheme) in [(2, Scheme::Noma), (3, Scheme::Sdma), (6, Scheme::Noma)] {
        let scene = reference_scene(k, 0.2, 9);
        let w0 = initialize_feasible(&scene, scheme, &cfg).unwrap();
        let sp = build_subproblem(&scene, &w0, 1e5, scheme, &cfg).unwrap();
        let h = &scene.channels.channels;
        let gamma: Vec<f64> = (0..k)
            .map(|u| match scheme {
                Scheme::Sdma => noma_isac::optimizer::sdma_surrogate_rate(u, &w0, h, 1.0)
                    .unwrap()
                    .eval(&w0.matrices),
                _ => (u..k)
                    .map(|j| surrogate_rate(j, u, &w0, h, 1.0).unwrap().eval(&w0.matrices))
                    .fold(f64::INFINITY, f64::min),
            })
            .collect();
        let x = sp.encode(&w0, &gamma);
        let violation = sp.program.max_violation(&x);
        assert!(violation <= 1e-7, "{scheme} K={k}: violation {violation}");
    }
}

#[test]
fn converged_state_stops_after_one_inner_iteration() {
    let scene = reference_scene(2, 0.0, 1);
    let cfg = SolverConfig::default();
    let report = noma_isac::solve(&scene, &cfg, Scheme::Noma).unwrap();
    let eta = report.trace.last().unwrap().eta;
    let mut state = IterationState::new(report.covariances.clone(), eta);
    assert!(inner_loop(&mut state, &scene, Scheme::Noma, &cfg).unwrap());
    assert_eq!(state.inner_total, 1);
}

#[test]
fn reported_beampattern_matches_the_beamformers() {
    let scene = reference_scene(2, 0.0, 1);
    let report = noma_isac::solve(&scene, &SolverConfig::default(), Scheme::Noma).unwrap();
    let cov: CMatrix = report.beamformers.to_covariances().total();
    for (angle, p) in scene.config.target_angles_deg.iter().zip(&report.radar.beampattern_mw) {
        let direct = beampattern_power(&cov, *angle, scene.geometry()).unwrap();
        assert!((direct - p).abs() <= 1e-9 * p.abs());
    }
}

#[test]
fn solver_config_validation_names_the_field() {
    let bad = SolverConfig {
        eta_shrink: 1.5,
        ..SolverConfig::default()
    };
    let err = bad.validate().unwrap_err().to_string();
    assert!(err.contains("eta_shrink"), "{err}");
}
