//! Adapter onto the Clarabel interior-point solver.
//!
//! Clarabel solves `min q'x  s.t.  Ax + s = b, s in K`. Each of our
//! constraints becomes a block of rows with `s` equal to the affine
//! expression (or its negation for equalities):
//!
//! * `Eq(e)`: zero cone, `s = -e`.
//! * `Nonneg(e)`: nonnegative orthant, `s = e`.
//! * `Soc{t, xs}`: second-order cone on `(t, xs...)`.
//! * `LogEpi{v, u, b}`: exponential cone on `(ln(b) v, 1, u)`, since
//!   `v <= log_b u` iff `1 * exp(ln(b) v / 1) <= u`.
//! * Hermitian block `W` of side `n`: PSD triangle cone of side `2n` on the
//!   real embedding `[[A, -B], [B, A]]`, `W = A + iB`. Clarabel packs the
//!   upper triangle column-major with off-diagonal entries scaled by sqrt(2).
//!   The embedding has every eigenvalue of `W` twice, so its PSD-ness is
//!   equivalent to that of `W`.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};
use openblas_src as _;

use super::{AffineExpr, ConicProgram, ConicSolution, ConicStatus, Constraint, HermitianVar};
use crate::error::{Error, Result};

const MAX_ITER: u32 = 200;

struct Profile {
    max_step_fraction: f64,
    static_regularization: f64,
}

/// Settings tried in order until one reaches full accuracy. The second
/// profile takes shorter steps with stronger regularization, which gets
/// through degenerate programs (a single rank-one beam pinned by the radar
/// caps, or a heavily weighted rank penalty) where the default stalls or
/// stops at reduced accuracy.
const PROFILES: [Profile; 2] = [
    Profile {
        max_step_fraction: 0.99,
        static_regularization: 1e-8,
    },
    Profile {
        max_step_fraction: 0.9,
        static_regularization: 1e-7,
    },
];

#[derive(Default)]
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
}

impl Rows {
    /// Append a row so that the slack equals `sign * e(x)`.
    fn push(&mut self, e: &AffineExpr, sign: f64) {
        let row = self.b.len();
        for &(c, coef) in &e.terms {
            self.i.push(row);
            self.j.push(c);
            self.v.push(-sign * coef);
        }
        self.b.push(sign * e.constant);
    }

    /// Row whose slack is `sum coef_c x_c` (no constant).
    fn push_linear(&mut self, terms: &[(usize, f64)]) {
        let row = self.b.len();
        for &(c, coef) in terms {
            self.i.push(row);
            self.j.push(c);
            self.v.push(-coef);
        }
        self.b.push(0.0);
    }

    fn push_constant(&mut self, c: f64) {
        self.b.push(c);
    }
}

/// Solve `p` to relative accuracy `tol`.
///
/// Malformed programs are reported as errors; infeasibility, unboundedness
/// and numerical failure are statuses on the returned solution.
pub fn solve_conic(p: &ConicProgram, tol: f64) -> Result<ConicSolution> {
    p.validate()?;
    if !(tol > 0.0) {
        return Err(Error::Validation(format!("tolerance must be positive, got {tol}")));
    }
    let n = p.n_coords();
    let mut rows = Rows::default();
    let mut cones: Vec<SupportedConeT<f64>> = Vec::new();

    let eqs: Vec<_> = p
        .constraints()
        .iter()
        .filter_map(|c| match c {
            Constraint::Eq(e) => Some(e),
            _ => None,
        })
        .collect();
    if !eqs.is_empty() {
        eqs.iter().for_each(|e| rows.push(e, -1.0));
        cones.push(SupportedConeT::ZeroConeT(eqs.len()));
    }

    let ineqs: Vec<_> = p
        .constraints()
        .iter()
        .filter_map(|c| match c {
            Constraint::Nonneg(e) => Some(e),
            _ => None,
        })
        .collect();
    if !ineqs.is_empty() {
        ineqs.iter().for_each(|e| rows.push(e, 1.0));
        cones.push(SupportedConeT::NonnegativeConeT(ineqs.len()));
    }

    for c in p.constraints() {
        if let Constraint::Soc { bound, entries } = c {
            rows.push(bound, 1.0);
            entries.iter().for_each(|e| rows.push(e, 1.0));
            cones.push(SupportedConeT::SecondOrderConeT(entries.len() + 1));
        }
    }

    for c in p.constraints() {
        if let Constraint::LogEpi { value, arg, base } = c {
            rows.push(&value.clone().scaled(base.ln()), 1.0);
            rows.push_constant(1.0);
            rows.push(arg, 1.0);
            cones.push(SupportedConeT::ExponentialConeT());
        }
    }

    for block in p.hermitian_blocks() {
        push_embedding(&mut rows, &block);
        cones.push(SupportedConeT::PSDTriangleConeT(2 * block.n));
    }

    let m = rows.b.len();
    let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
    let mut q = vec![0.0; n];
    for &(c, coef) in &p.objective().terms {
        q[c] -= coef;
    }
    let quad = CscMatrix::zeros((n, n));

    let scale = 1.0 + rows.b.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    // Best reduced-accuracy result seen so far, returned if no profile
    // reaches full accuracy.
    let mut fallback: Option<ConicSolution> = None;
    for profile in PROFILES {
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(MAX_ITER)
            .tol_gap_abs(tol)
            .tol_gap_rel(tol)
            .tol_feas(tol)
            .max_step_fraction(profile.max_step_fraction)
            .static_regularization_constant(profile.static_regularization)
            .build()
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        let mut solver = DefaultSolver::new(&quad, &q, &a, &rows.b, &cones, settings)
            .map_err(|e| Error::Backend(format!("{e:?}")))?;
        solver.solve();
        let sol = &solver.solution;

        let x = sol.x.clone();
        let max_violation = if x.iter().all(|v| v.is_finite()) {
            p.max_violation(&x)
        } else {
            f64::INFINITY
        };
        let (status, exact) = match sol.status {
            SolverStatus::Solved => (ConicStatus::Optimal, true),
            SolverStatus::PrimalInfeasible => (ConicStatus::Infeasible, true),
            SolverStatus::DualInfeasible => (ConicStatus::Unbounded, true),
            SolverStatus::AlmostSolved if max_violation <= tol.sqrt() * scale => (ConicStatus::Optimal, false),
            SolverStatus::AlmostPrimalInfeasible => (ConicStatus::Infeasible, false),
            SolverStatus::AlmostDualInfeasible => (ConicStatus::Unbounded, false),
            _ => (ConicStatus::NumericalTrouble, false),
        };
        let candidate = ConicSolution {
            status,
            objective: p.objective().eval(&x),
            x,
            max_violation,
            iterations: sol.iterations,
        };
        if exact {
            return Ok(candidate);
        }
        let better = match &fallback {
            None => true,
            Some(f) => f.status == ConicStatus::NumericalTrouble && status != ConicStatus::NumericalTrouble,
        };
        if better {
            fallback = Some(candidate);
        }
    }
    Ok(fallback.expect("at least one settings profile"))
}

fn push_embedding(rows: &mut Rows, w: &HermitianVar) {
    let n = w.n;
    let sqrt2 = std::f64::consts::SQRT_2;
    for col in 0..2 * n {
        for row in 0..=col {
            let scale = if row == col { 1.0 } else { sqrt2 };
            let terms: Vec<(usize, f64)> = embedding_entry(w, row, col)
                .into_iter()
                .map(|(c, v)| (c, v * scale))
                .collect();
            rows.push_linear(&terms);
        }
    }
}

/// Entry `(r, c)`, `r <= c`, of the real embedding as a coordinate combination.
fn embedding_entry(w: &HermitianVar, r: usize, c: usize) -> Option<(usize, f64)> {
    let n = w.n;
    match (r < n, c < n) {
        (true, true) => Some((w.re(r, c), 1.0)),
        (false, false) => Some((w.re(r - n, c - n), 1.0)),
        // top-right block holds -B with B_ij = Im W_ij
        (true, false) => {
            let cc = c - n;
            match r.cmp(&cc) {
                std::cmp::Ordering::Less => Some((w.im(r, cc), -1.0)),
                std::cmp::Ordering::Greater => Some((w.im(cc, r), 1.0)),
                std::cmp::Ordering::Equal => None,
            }
        }
        (false, true) => unreachable!("lower triangle is not stored"),
    }
}
