//! Penalty-based successive convex approximation for the joint
//! communication and sensing design.
//!
//! Each outer iteration fixes a penalty parameter `eta` and runs an inner SCA
//! loop on the rank-penalized problem; the inner loop linearizes the
//! interference terms and the spectral norms around the current iterate and
//! solves the resulting conic program. `eta` shrinks geometrically until the
//! penalty `sum_k (||W_k||_* - ||W_k||_2)` vanishes, at which point every
//! covariance is rank-one and the beamformers are read off the principal
//! eigenvectors.

mod algorithm;
mod assemble;
mod check;
mod surrogate;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::metrics::{BeamformerSet, CovarianceSet, RadarMetrics};
use crate::scene::ScenarioConfig;

pub use self::algorithm::{
    extract_beamformers, initialize_feasible, inner_loop, penalized_objective, penalty_residual, principal_beamformers,
    solve,
};
pub use self::assemble::{build_subproblem, Subproblem};
pub use self::check::{check_beamformers, check_constraints, ConstraintCheck};
pub use self::surrogate::{
    interference_term, linearized_interference_bound, sdma_surrogate_rate, spectral_norm_surrogate, surrogate_rate,
    InterferenceBound, LinearForm, SpectralSurrogate, SurrogateRate,
};

/// Transmission scheme. `Noma` and `Sdma` are the joint designs; the other
/// two drop one side of the problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Noma,
    Sdma,
    /// NOMA rates only: no sensing objective, no beampattern or
    /// cross-correlation constraints.
    CommOnly,
    /// Sensing only: no rate slacks and no minimum-rate constraints.
    SenseOnly,
}

/// How user rates are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateModel {
    Noma,
    Sdma,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Noma, Scheme::Sdma, Scheme::CommOnly, Scheme::SenseOnly];

    pub fn rate_model(self) -> Option<RateModel> {
        match self {
            Scheme::Noma | Scheme::CommOnly => Some(RateModel::Noma),
            Scheme::Sdma => Some(RateModel::Sdma),
            Scheme::SenseOnly => None,
        }
    }

    /// Whether the beampattern balance and cross-correlation constraints apply.
    pub fn senses(self) -> bool {
        matches!(self, Scheme::Noma | Scheme::Sdma | Scheme::SenseOnly)
    }

    /// `(rho_c, rho_r)` actually used by the scheme.
    pub fn effective_weights(self, config: &ScenarioConfig) -> (f64, f64) {
        match self {
            Scheme::Noma | Scheme::Sdma => (config.weight_comm, config.weight_radar),
            Scheme::CommOnly => (1.0, 0.0),
            Scheme::SenseOnly => (0.0, 1.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Noma => "noma",
            Scheme::Sdma => "sdma",
            Scheme::CommOnly => "comm-only",
            Scheme::SenseOnly => "sense-only",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        Scheme::ALL.into_iter().find(|sc| sc.as_str() == s).ok_or_else(|| {
            validation(format!(
                "unknown scheme '{s}' (expected noma, sdma, comm-only or sense-only)"
            ))
        })
    }
}

/// Iteration controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub eta0: f64,
    /// Multiplier applied to `eta` after each outer iteration, in (0, 1).
    pub eta_shrink: f64,
    /// Relative objective change that ends an inner loop.
    pub inner_tol: f64,
    /// Penalty residual that ends the outer loop.
    pub penalty_tol: f64,
    pub max_inner_iters: usize,
    pub max_outer_iters: usize,
    /// Largest `(||W||_* - ||W||_2) / ||W||_2` accepted when extracting a
    /// beamformer.
    pub rank1_extract_tol: f64,
    /// Relative tightening of the radar caps inside the subproblems, on top
    /// of the margin reserved for rank-one extraction.
    pub radar_backoff: f64,
    /// Accuracy requested from the conic solver.
    pub subproblem_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            eta0: 1e5,
            eta_shrink: 0.2,
            inner_tol: 1e-2,
            penalty_tol: 1e-4,
            max_inner_iters: 50,
            max_outer_iters: 30,
            rank1_extract_tol: 1e-3,
            radar_backoff: 1e-6,
            subproblem_tol: 1e-8,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(validation(format!("{name} must be positive and finite, got {v}")))
            }
        };
        positive("eta0", self.eta0)?;
        positive("inner_tol", self.inner_tol)?;
        positive("penalty_tol", self.penalty_tol)?;
        positive("rank1_extract_tol", self.rank1_extract_tol)?;
        positive("subproblem_tol", self.subproblem_tol)?;
        if !(self.eta_shrink > 0.0 && self.eta_shrink < 1.0) {
            return Err(validation(format!(
                "eta_shrink must lie in (0, 1), got {}",
                self.eta_shrink
            )));
        }
        if !(0.0..0.5).contains(&self.radar_backoff) {
            return Err(validation(format!(
                "radar_backoff must lie in [0, 0.5), got {}",
                self.radar_backoff
            )));
        }
        if self.max_inner_iters == 0 || self.max_outer_iters == 0 {
            return Err(validation("max_inner_iters and max_outer_iters must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Converged,
    MaxIters,
    Infeasible,
    BackendFailure,
}

impl SolveStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveStatus::Converged => "converged",
            SolveStatus::MaxIters => "max-iters",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::BackendFailure => "backend-failure",
        }
    }
}

impl fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One point of the iteration history.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub outer: usize,
    /// 0 for the starting point of an inner loop.
    pub inner: usize,
    pub eta: f64,
    /// True penalized objective at the iterate.
    pub objective: f64,
    pub penalty: f64,
}

/// State carried between iterations.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationState {
    /// Current expansion point.
    pub w: CovarianceSet,
    /// Rate slacks of the last subproblem; empty before the first solve.
    pub gamma: Vec<f64>,
    pub eta: f64,
    pub outer: usize,
    pub inner_total: usize,
    pub trace: Vec<TraceEntry>,
}

impl IterationState {
    pub fn new(w: CovarianceSet, eta: f64) -> Self {
        Self {
            w,
            gamma: Vec::new(),
            eta,
            outer: 0,
            inner_total: 0,
            trace: Vec::new(),
        }
    }

    pub fn objective_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.objective).collect()
    }

    pub fn penalty_trace(&self) -> Vec<f64> {
        self.trace.iter().map(|t| t.penalty).collect()
    }

    /// Objective values grouped by inner loop.
    pub fn inner_loops(&self) -> Vec<Vec<f64>> {
        let mut loops: Vec<Vec<f64>> = Vec::new();
        for t in &self.trace {
            if t.inner == 0 || loops.is_empty() {
                loops.push(Vec::new());
            }
            loops.last_mut().unwrap().push(t.objective);
        }
        loops
    }
}

/// Outcome of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub scheme: Scheme,
    pub status: SolveStatus,
    /// Beamformers in decoding (weakest-first) order, mW^(1/2).
    pub beamformers: BeamformerSet,
    /// Final covariances, mW.
    pub covariances: CovarianceSet,
    /// Rates of the extracted beamformers, decoding order.
    pub rates: Vec<f64>,
    pub radar: RadarMetrics,
    /// `rho_c * sum(rates) + rho_r * sum P` with the scheme's weights.
    pub objective: f64,
    pub penalty_residual: f64,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub trace: Vec<TraceEntry>,
}

impl SolveReport {
    pub fn sum_rate(&self) -> f64 {
        self.rates.iter().sum()
    }
}
