use super::assemble::{build_feasibility_program, build_subproblem, rate_links, Subproblem, NOISE};
use super::{IterationState, RateModel, Scheme, SolveReport, SolveStatus, SolverConfig, TraceEntry};
use crate::conic::{solve_conic, ConicSolution, ConicStatus};
use crate::error::{Error, Result};
use crate::linalg::{hermitian_eigen, normalize_phase, nuclear_and_spectral, CMatrix, CVector};
use crate::metrics::{
    noma_rates, noma_rates_cov, radar_metrics, sdma_rates, sdma_rates_cov, weighted_objective, BeamformerSet,
    CovarianceSet,
};
use crate::scene::Scene;

/// Feasibility slack below which the scenario is declared infeasible.
const FEASIBILITY_MARGIN: f64 = 1e-7;

/// Covariances whose largest eigenvalue falls below this fraction of the
/// largest trace in the set are treated as switched off.
const ZERO_POWER_RATIO: f64 = 1e-9;

/// `sum_k (||W_k||_* - ||W_k||_2)`.
pub fn penalty_residual(covs: &CovarianceSet) -> f64 {
    covs.matrices
        .iter()
        .map(|w| {
            let (nuclear, spectral) = nuclear_and_spectral(w);
            nuclear - spectral
        })
        .sum()
}

fn general_rank_rates(model: RateModel, scene: &Scene, covs: &CovarianceSet) -> Result<Vec<f64>> {
    let h = &scene.channels.channels;
    match model {
        RateModel::Noma => noma_rates_cov(covs, h, NOISE),
        RateModel::Sdma => sdma_rates_cov(covs, h, NOISE),
    }
}

/// The penalized objective `rho_c sum R_k + rho_r sum P(theta_m) -
/// (1/eta) sum_k (||W_k||_* - ||W_k||_2)` with general-rank rates.
pub fn penalized_objective(scene: &Scene, scheme: Scheme, covs: &CovarianceSet, eta: f64) -> Result<f64> {
    let (rho_c, rho_r) = scheme.effective_weights(&scene.config);
    let rates = match scheme.rate_model() {
        Some(model) if rho_c != 0.0 => general_rank_rates(model, scene, covs)?,
        _ => Vec::new(),
    };
    let cfg = &scene.config;
    let radar = radar_metrics(&covs.total(), &cfg.target_angles_deg, &cfg.geometry)?;
    Ok(weighted_objective(&rates, &radar, rho_c, rho_r) - penalty_residual(covs) / eta)
}

fn solve_checked(sp: &Subproblem, config: &SolverConfig, what: &str) -> Result<ConicSolution> {
    let sol = solve_conic(&sp.program, config.subproblem_tol)?;
    if sol.status == ConicStatus::NumericalTrouble {
        // one retry at a looser accuracy before giving up
        let retry = solve_conic(
            &sp.program,
            config.subproblem_tol.sqrt().min(1e-6).max(config.subproblem_tol),
        )?;
        if retry.status == ConicStatus::Optimal {
            return Ok(retry);
        }
    }
    match sol.status {
        ConicStatus::Optimal => Ok(sol),
        other => Err(Error::Backend(format!("{what}: solver returned {other:?}"))),
    }
}

/// A feasible starting point of the rank-relaxed problem.
///
/// Solves a convex program that keeps the per-antenna and radar constraints
/// and writes every rate requirement as the equivalent linear SINR
/// condition, maximizing the smallest normalized SINR slack. A negative
/// optimum (or an infeasible program) means the targets are unattainable.
pub fn initialize_feasible(scene: &Scene, scheme: Scheme, config: &SolverConfig) -> Result<CovarianceSet> {
    if let Some(model) = scheme.rate_model() {
        // No covariance can deliver more than P_t ||h_j||^2 to receiver j.
        let h = &scene.channels.channels;
        let r_min = scene.min_rates();
        for (k, j, _) in rate_links(model, h.len()) {
            let ceiling = (1.0 + scene.config.total_power_mw * h[j].norm_squared() / NOISE).log2();
            if r_min[k] > ceiling {
                return Err(Error::Infeasible(format!(
                    "user {k} needs {} bit/s/Hz but receiver {j} supports at most {ceiling:.3}",
                    r_min[k]
                )));
            }
        }
    }
    let (sp, slack) = build_feasibility_program(scene, scheme, config);
    let sol = solve_conic(&sp.program, config.subproblem_tol)?;
    match sol.status {
        ConicStatus::Optimal => {}
        ConicStatus::Infeasible => {
            return Err(Error::Infeasible(
                "rate targets conflict with the power and sensing constraints".into(),
            ))
        }
        other => {
            return Err(Error::Backend(format!(
                "feasibility program: solver returned {other:?}"
            )))
        }
    }
    let s = sol.scalar(slack);
    if s < -FEASIBILITY_MARGIN {
        return Err(Error::Infeasible(format!(
            "rate targets unattainable (best normalized SINR slack {s:.3e})"
        )));
    }
    Ok(sp.decode(&sol).0)
}

/// Run one inner SCA loop at the state's `eta`, appending to its trace.
/// Returns whether the loop met `inner_tol` within `max_inner_iters`.
pub fn inner_loop(state: &mut IterationState, scene: &Scene, scheme: Scheme, config: &SolverConfig) -> Result<bool> {
    let mut previous = penalized_objective(scene, scheme, &state.w, state.eta)?;
    state.trace.push(TraceEntry {
        outer: state.outer,
        inner: 0,
        eta: state.eta,
        objective: previous,
        penalty: penalty_residual(&state.w),
    });
    for it in 1..=config.max_inner_iters {
        let sp = build_subproblem(scene, &state.w, state.eta, scheme, config)?;
        let sol = solve_checked(&sp, config, "subproblem")?;
        let (w, gamma) = sp.decode(&sol);
        let objective = penalized_objective(scene, scheme, &w, state.eta)?;
        state.w = w;
        state.gamma = gamma;
        state.inner_total += 1;
        state.trace.push(TraceEntry {
            outer: state.outer,
            inner: it,
            eta: state.eta,
            objective,
            penalty: penalty_residual(&state.w),
        });
        let change = (objective - previous).abs() / previous.abs().max(1e-9);
        if change < config.inner_tol {
            return Ok(true);
        }
        previous = objective;
    }
    Ok(false)
}

/// Rank-one beamformers `sqrt(lambda_max) v_max` of each covariance,
/// failing when a covariance is not numerically rank-one.
pub fn extract_beamformers(covs: &CovarianceSet, tol: f64) -> Result<BeamformerSet> {
    extract(covs, Some(tol))
}

/// Like [`extract_beamformers`] without the rank check, for reporting
/// unconverged runs.
pub fn principal_beamformers(covs: &CovarianceSet) -> BeamformerSet {
    extract(covs, None).expect("unchecked extraction cannot fail")
}

fn extract(covs: &CovarianceSet, tol: Option<f64>) -> Result<BeamformerSet> {
    let floor = covs.matrices.iter().map(|w| w.trace().re).fold(0.0, f64::max) * ZERO_POWER_RATIO;
    let mut vectors = Vec::with_capacity(covs.len());
    for (user, w) in covs.matrices.iter().enumerate() {
        let (values, vecs) = hermitian_eigen(w);
        let lambda = values[0];
        if lambda <= floor {
            vectors.push(CVector::zeros(w.nrows()));
            continue;
        }
        if let Some(tol) = tol {
            let nuclear: f64 = values.iter().map(|v| v.abs()).sum();
            let ratio = (nuclear - lambda) / lambda;
            if ratio > tol {
                return Err(Error::RankDeficiency { user, ratio, tol });
            }
        }
        let mut v: CVector = vecs.column(0).into_owned();
        normalize_phase(&mut v);
        vectors.push(v * nalgebra::Complex::new(lambda.sqrt(), 0.0));
    }
    BeamformerSet::new(vectors)
}

fn report(
    scene: &Scene,
    scheme: Scheme,
    state: IterationState,
    status: SolveStatus,
    beamformers: BeamformerSet,
) -> Result<SolveReport> {
    let cfg = &scene.config;
    let h = &scene.channels.channels;
    let rates = match scheme.rate_model().unwrap_or(RateModel::Noma) {
        RateModel::Noma => noma_rates(&beamformers, h, NOISE)?,
        RateModel::Sdma => sdma_rates(&beamformers, h, NOISE)?,
    };
    let cov: CMatrix = beamformers.to_covariances().total();
    let radar = radar_metrics(&cov, &cfg.target_angles_deg, &cfg.geometry)?;
    let (rho_c, rho_r) = scheme.effective_weights(cfg);
    Ok(SolveReport {
        scheme,
        status,
        objective: weighted_objective(&rates, &radar, rho_c, rho_r),
        penalty_residual: penalty_residual(&state.w),
        rates,
        radar,
        beamformers,
        covariances: state.w,
        inner_iterations: state.inner_total,
        outer_iterations: state.outer,
        trace: state.trace,
    })
}

/// Run the double-layer penalty algorithm.
///
/// Returns `Err(Error::Infeasible)` when no starting point exists and
/// `Err(Error::Backend)` when a subproblem cannot be solved. Running out of
/// inner or outer iterations is not an error: the report carries
/// [`SolveStatus::MaxIters`], the last (best) iterate and its
/// principal-eigenvector beamformers.
pub fn solve(scene: &Scene, config: &SolverConfig, scheme: Scheme) -> Result<SolveReport> {
    config.validate()?;
    scene.config.validate()?;
    let w0 = initialize_feasible(scene, scheme, config)?;
    let mut state = IterationState::new(w0, config.eta0);
    for outer in 1..=config.max_outer_iters {
        state.outer = outer;
        if !inner_loop(&mut state, scene, scheme, config)? {
            break;
        }
        if penalty_residual(&state.w) <= config.penalty_tol {
            let beams = extract_beamformers(&state.w, config.rank1_extract_tol)?;
            return report(scene, scheme, state, SolveStatus::Converged, beams);
        }
        state.eta *= config.eta_shrink;
    }
    let beams = principal_beamformers(&state.w);
    report(scene, scheme, state, SolveStatus::MaxIters, beams)
}
