//! Assembly of the convex subproblems.
//!
//! Variables are the scaled covariances `X_k = W_k / P_t`, one Hermitian PSD
//! block each, plus one rate slack `gamma_k` per user when the scheme has a
//! communication part. Scaling by the power budget keeps the per-antenna
//! equalities at `1/N` and the PSD blocks of order one.

use nalgebra::Complex;

use super::surrogate::{sdma_surrogate_rate, spectral_norm_surrogate, surrogate_rate, LinearForm, SurrogateRate};
use super::{RateModel, Scheme, SolverConfig};
use crate::conic::{AffineExpr, ConicProgram, ConicSolution, HermitianVar, ScalarVar};
use crate::error::Result;
use crate::linalg::{outer, CMatrix, CVector};
use crate::metrics::CovarianceSet;
use crate::scene::Scene;

/// Noise power of the normalized channel convention.
pub(crate) const NOISE: f64 = 1.0;

/// A built subproblem with handles to decode its solution.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub program: ConicProgram,
    pub covariances: Vec<HermitianVar>,
    /// Rate slacks; empty for the sensing-only scheme.
    pub gammas: Vec<ScalarVar>,
    /// Power unit of the variables: `W_k = power_scale * X_k`.
    pub power_scale: f64,
}

impl Subproblem {
    pub fn decode(&self, sol: &ConicSolution) -> (CovarianceSet, Vec<f64>) {
        let s = Complex::new(self.power_scale, 0.0);
        let matrices = self
            .covariances
            .iter()
            .map(|v| crate::linalg::hermitian_part(&(sol.hermitian(v) * s)))
            .collect();
        let gammas = self.gammas.iter().map(|&g| sol.scalar(g)).collect();
        (CovarianceSet { matrices }, gammas)
    }

    /// Coordinates of `(covs, gammas)` in this program, for feasibility checks.
    pub fn encode(&self, covs: &CovarianceSet, gammas: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.program.n_coords()];
        let inv = Complex::new(1.0 / self.power_scale, 0.0);
        for (v, w) in self.covariances.iter().zip(&covs.matrices) {
            v.store(&(w * inv), &mut x);
        }
        for (g, &val) in self.gammas.iter().zip(gammas) {
            x[g.0] = val;
        }
        x
    }

    /// `sum_u Re Tr(C_u W_u) + constant` in program coordinates.
    fn form_expr(&self, form: &LinearForm) -> AffineExpr {
        let mut e = AffineExpr::constant(form.constant);
        for (u, c) in &form.terms {
            e.add_scaled(&self.covariances[*u].real_trace_with(c), self.power_scale);
        }
        e
    }

    /// `Re Tr(C sum_u W_u)` in program coordinates.
    fn total_trace(&self, c: &CMatrix) -> AffineExpr {
        let mut e = AffineExpr::zero();
        for v in &self.covariances {
            e.add_scaled(&v.real_trace_with(c), self.power_scale);
        }
        e
    }
}

/// Surrogates of every rate that bounds `gamma_k`, expanded at `w_n`.
/// Returns `(user, surrogate)` pairs.
pub(crate) fn rate_surrogates(
    model: RateModel,
    scene: &Scene,
    w_n: &CovarianceSet,
) -> Result<Vec<(usize, SurrogateRate)>> {
    let h = &scene.channels.channels;
    let k_users = h.len();
    let mut out = Vec::new();
    match model {
        RateModel::Noma => {
            for k in 0..k_users {
                for j in k..k_users {
                    out.push((k, surrogate_rate(j, k, w_n, h, NOISE)?));
                }
            }
        }
        RateModel::Sdma => {
            for k in 0..k_users {
                out.push((k, sdma_surrogate_rate(k, w_n, h, NOISE)?));
            }
        }
    }
    Ok(out)
}

/// Decoding links `(user k, receiver j, interferers)` a rate model requires.
pub(crate) fn rate_links(model: RateModel, k_users: usize) -> Vec<(usize, usize, Vec<usize>)> {
    match model {
        RateModel::Noma => (0..k_users)
            .flat_map(|k| (k..k_users).map(move |j| (k, j, (k + 1..k_users).collect())))
            .collect(),
        RateModel::Sdma => (0..k_users)
            .map(|k| (k, k, (0..k_users).filter(|&i| i != k).collect()))
            .collect(),
    }
}

fn declare_blocks(p: &mut ConicProgram, scene: &Scene, with_gammas: bool) -> (Vec<HermitianVar>, Vec<ScalarVar>) {
    let n = scene.config.geometry.n_antennas;
    let k_users = scene.config.n_users;
    let covs = (0..k_users).map(|k| p.add_hermitian_psd(format!("W_{k}"), n)).collect();
    let gammas = if with_gammas {
        (0..k_users).map(|k| p.add_scalar(format!("gamma_{k}"))).collect()
    } else {
        Vec::new()
    };
    (covs, gammas)
}

/// Per-antenna equalities and, for sensing schemes, the beampattern balance
/// and cross-correlation constraints.
///
/// The radar caps are tightened so that they still hold after rank-one
/// extraction. Dropping a residual of nuclear norm `e` moves each
/// `a_k^H R a_p` by at most `N e`, so `|P_k - P_p|` moves by at most `2 N e`
/// and `sqrt(C)` by at most `N e`; with `e <= penalty_tol` at convergence
/// these margins, plus a small relative backoff for solver accuracy, cover it.
fn add_shared_constraints(sp: &mut Subproblem, scene: &Scene, scheme: Scheme, config: &SolverConfig) {
    let backoff = config.radar_backoff;
    let cfg = &scene.config;
    let n = cfg.geometry.n_antennas;
    let s = sp.power_scale;
    for i in 0..n {
        let mut e = AffineExpr::constant(-cfg.total_power_mw / (n as f64 * s));
        for v in &sp.covariances {
            e.add_term(v.re(i, i), 1.0);
        }
        sp.program.add_eq(e);
    }
    if !scheme.senses() {
        return;
    }
    let steer = scene.steering_vectors();
    let m = steer.len();
    let beam: Vec<AffineExpr> = steer.iter().map(|a| sp.total_trace(&outer(a, a))).collect();
    let shift = n as f64 * config.penalty_tol;
    let diff_cap = (cfg.power_diff_cap * (1.0 - backoff) - 2.0 * shift).max(0.0);
    for k in 0..m {
        for p in 0..m {
            if k != p {
                // P(theta_k) - P(theta_p) <= P_diff, rows divided by the power unit
                let e = beam[p].clone().minus(&beam[k]).offset(diff_cap).scaled(1.0 / s);
                sp.program.add_nonneg(e);
            }
        }
    }
    if m >= 2 {
        let weight = (2.0 / (m * m - m) as f64).sqrt() / s;
        let mut entries = Vec::with_capacity(m * (m - 1));
        for k in 0..m {
            for p in k + 1..m {
                // a_k^H R a_p = Tr(a_p a_k^H R)
                let c = outer(&steer[p], &steer[k]);
                let mut re = AffineExpr::zero();
                let mut im = AffineExpr::zero();
                for v in &sp.covariances {
                    let (r, i) = v.trace_with(&c);
                    re.add_scaled(&r, s * weight);
                    im.add_scaled(&i, s * weight);
                }
                entries.push(re);
                entries.push(im);
            }
        }
        let bound = ((cfg.crosscorr_cap * (1.0 - backoff)).sqrt() - shift).max(0.0) / s;
        sp.program.add_soc(AffineExpr::constant(bound), entries);
    }
}

/// Build the penalized SCA subproblem expanded at `w_n` with penalty
/// parameter `eta`.
///
/// Objective: `rho_c sum gamma_k + rho_r sum_m a_m^H (sum W) a_m
/// - (1/eta) sum_k (Tr W_k + W^_k)` with `W^_k` the spectral-norm tangent.
/// Each rate link contributes `gamma_k <= log2(arg) + F^` as a log-epigraph
/// constraint; the argument is normalized by its value at `w_n`.
pub fn build_subproblem(
    scene: &Scene,
    w_n: &CovarianceSet,
    eta: f64,
    scheme: Scheme,
    config: &SolverConfig,
) -> Result<Subproblem> {
    let (rho_c, rho_r) = scheme.effective_weights(&scene.config);
    let mut program = ConicProgram::new();
    let model = scheme.rate_model();
    let (covariances, gammas) = declare_blocks(&mut program, scene, model.is_some());
    let mut sp = Subproblem {
        program,
        covariances,
        gammas,
        power_scale: scene.config.total_power_mw,
    };

    let mut objective = AffineExpr::zero();
    for &g in &sp.gammas {
        objective.add_term(g.0, rho_c);
    }
    if rho_r > 0.0 {
        for a in scene.steering_vectors() {
            objective.add_scaled(&sp.total_trace(&outer(&a, &a)), rho_r);
        }
    }
    let n = scene.config.geometry.n_antennas;
    let identity = CMatrix::identity(n, n);
    for (k, w) in w_n.matrices.iter().enumerate() {
        let tangent = spectral_norm_surrogate(w).linear_form();
        let mut penalty = LinearForm {
            constant: tangent.constant,
            terms: vec![(k, identity.clone())],
        };
        penalty.terms.extend(tangent.terms.into_iter().map(|(_, c)| (k, c)));
        let e = sp.form_expr(&penalty);
        objective.add_scaled(&e, -1.0 / eta);
    }
    sp.program.maximize(objective);

    add_shared_constraints(&mut sp, scene, scheme, config);

    if let Some(model) = model {
        for (k, rate) in rate_surrogates(model, scene, w_n)? {
            let arg_form = rate.log_argument();
            let anchor = arg_form.eval(&w_n.matrices).max(f64::MIN_POSITIVE);
            let arg = sp.form_expr(&arg_form).scaled(1.0 / anchor);
            let bound = sp.form_expr(&rate.bound().linear_form());
            let value = sp.gammas[k].expr().minus(&bound).offset(-anchor.log2());
            sp.program.add_log_epi(value, arg, 2.0);
        }
        let r_min = scene.min_rates();
        for (g, r) in sp.gammas.clone().iter().zip(r_min) {
            sp.program.add_nonneg(g.expr().offset(-r));
        }
    }
    Ok(sp)
}

/// Convex feasibility program behind the initial point: per-antenna and
/// radar constraints together with every rate link written as a linear SINR
/// requirement `h_j^H W_k h_j >= beta_k (noise + interference)`. The slack of
/// the worst link, normalized by `noise + P_t ||h_j||^2`, is maximized (and
/// capped at 1 to keep the program bounded).
pub(crate) fn build_feasibility_program(
    scene: &Scene,
    scheme: Scheme,
    config: &SolverConfig,
) -> (Subproblem, ScalarVar) {
    let mut program = ConicProgram::new();
    let (covariances, _) = declare_blocks(&mut program, scene, false);
    let slack = program.add_scalar("slack");
    let mut sp = Subproblem {
        program,
        covariances,
        gammas: Vec::new(),
        power_scale: scene.config.total_power_mw,
    };
    sp.program.maximize(slack.expr());
    sp.program.add_le(slack.expr(), AffineExpr::constant(1.0));
    add_shared_constraints(&mut sp, scene, scheme, config);

    if let Some(model) = scheme.rate_model() {
        let h: &[CVector] = &scene.channels.channels;
        let r_min = scene.min_rates();
        for (k, j, interferers) in rate_links(model, h.len()) {
            let beta = r_min[k].exp2() - 1.0;
            let gram = outer(&h[j], &h[j]);
            let norm = NOISE + scene.config.total_power_mw * h[j].norm_squared();
            let mut e = sp.covariances[k].real_trace_with(&gram).scaled(sp.power_scale);
            for &i in &interferers {
                e.add_scaled(&sp.covariances[i].real_trace_with(&gram), -beta * sp.power_scale);
            }
            let e = e.offset(-beta * NOISE).scaled(1.0 / norm).minus(&slack.expr());
            sp.program.add_nonneg(e);
        }
    }
    (sp, slack)
}
