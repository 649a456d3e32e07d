//! Backend-agnostic conic programs.
//!
//! A [`ConicProgram`] maximizes an affine objective over real scalar
//! variables and complex Hermitian PSD blocks subject to
//!
//! * affine equalities `e(x) = 0` and inequalities `e(x) >= 0`,
//! * second-order cones `||(e_1(x), ..., e_m(x))|| <= t(x)`,
//! * log-epigraphs `v(x) <= log_b(u(x))`.
//!
//! Every variable is flattened into real *coordinates*. A scalar owns one
//! coordinate. A Hermitian block of side `n` owns `n^2`: the real parts of
//! the upper triangle (diagonal included, column-major) followed by the
//! imaginary parts of the strict upper triangle. The PSD constraint of a
//! block is implicit in its declaration; [`solve_conic`] presents it to the
//! backend through the real symmetric embedding `[[Re W, -Im W], [Im W, Re W]]`.

mod clarabel;
mod text;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{validation, Result};
use crate::linalg::CMatrix;

pub use self::clarabel::solve_conic;
pub use self::text::{parse_program, write_program};

/// Default subproblem accuracy.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Scalar,
    HermitianPsd(usize),
}

impl VarKind {
    pub fn n_coords(self) -> usize {
        match self {
            VarKind::Scalar => 1,
            VarKind::HermitianPsd(n) => n * n,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VarDecl {
    pub name: String,
    pub kind: VarKind,
    pub offset: usize,
}

/// Handle to a scalar variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalarVar(pub usize);

impl ScalarVar {
    pub fn expr(self) -> AffineExpr {
        AffineExpr::term(self.0, 1.0)
    }
}

/// Handle to a Hermitian PSD block.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HermitianVar {
    pub offset: usize,
    pub n: usize,
}

impl HermitianVar {
    /// Coordinate of `Re W_ij`, symmetric in `(i, j)`.
    pub fn re(&self, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        self.offset + j * (j + 1) / 2 + i
    }

    /// Coordinate of `Im W_ij` for `i < j`.
    pub fn im(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < j);
        self.offset + self.n * (self.n + 1) / 2 + j * (j - 1) / 2 + i
    }

    /// `Tr(C W)` as real and imaginary affine parts, for arbitrary complex `C`.
    pub fn trace_with(&self, c: &CMatrix) -> (AffineExpr, AffineExpr) {
        assert_eq!(c.nrows(), self.n);
        let mut re = AffineExpr::zero();
        let mut im = AffineExpr::zero();
        for i in 0..self.n {
            let d = c[(i, i)];
            re.add_term(self.re(i, i), d.re);
            im.add_term(self.re(i, i), d.im);
            for j in i + 1..self.n {
                // C_ji W_ij + C_ij conj(W_ij) with W_ij = x + iy
                let sum = c[(j, i)] + c[(i, j)];
                let diff = c[(j, i)] - c[(i, j)];
                re.add_term(self.re(i, j), sum.re);
                re.add_term(self.im(i, j), -diff.im);
                im.add_term(self.re(i, j), sum.im);
                im.add_term(self.im(i, j), diff.re);
            }
        }
        (re.compact(), im.compact())
    }

    /// `Re Tr(C W)`; exact for Hermitian `C`.
    pub fn real_trace_with(&self, c: &CMatrix) -> AffineExpr {
        self.trace_with(c).0
    }

    /// Rebuild the matrix from a coordinate vector.
    pub fn value(&self, x: &[f64]) -> CMatrix {
        let mut w = CMatrix::zeros(self.n, self.n);
        for j in 0..self.n {
            for i in 0..=j {
                let im = if i < j { x[self.im(i, j)] } else { 0.0 };
                w[(i, j)] = Complex64::new(x[self.re(i, j)], im);
                w[(j, i)] = Complex64::new(x[self.re(i, j)], -im);
            }
        }
        w
    }

    /// Write `w` (taken Hermitian) into a coordinate vector.
    pub fn store(&self, w: &CMatrix, x: &mut [f64]) {
        for j in 0..self.n {
            for i in 0..=j {
                let z = (w[(i, j)] + w[(j, i)].conj()) * 0.5;
                x[self.re(i, j)] = z.re;
                if i < j {
                    x[self.im(i, j)] = z.im;
                }
            }
        }
    }
}

/// Sparse affine function of the coordinates.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn constant(c: f64) -> Self {
        Self {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn term(coord: usize, coef: f64) -> Self {
        Self {
            terms: vec![(coord, coef)],
            constant: 0.0,
        }
    }

    pub fn add_term(&mut self, coord: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((coord, coef));
        }
    }

    pub fn add_scaled(&mut self, other: &AffineExpr, scale: f64) {
        self.terms.extend(other.terms.iter().map(|&(c, v)| (c, v * scale)));
        self.constant += other.constant * scale;
    }

    pub fn plus(mut self, other: &AffineExpr) -> Self {
        self.add_scaled(other, 1.0);
        self
    }

    pub fn minus(mut self, other: &AffineExpr) -> Self {
        self.add_scaled(other, -1.0);
        self
    }

    pub fn scaled(mut self, scale: f64) -> Self {
        self.terms.iter_mut().for_each(|t| t.1 *= scale);
        self.constant *= scale;
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    /// Merge duplicate coordinates, drop zeros and sort by coordinate.
    pub fn compact(mut self) -> Self {
        self.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(self.terms.len());
        for (c, v) in self.terms {
            match merged.last_mut() {
                Some(last) if last.0 == c => last.1 += v,
                _ => merged.push((c, v)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        self.terms = merged;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(c, v)| v * x[c]).sum::<f64>()
    }

    fn max_coord(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `e(x) = 0`
    Eq(AffineExpr),
    /// `e(x) >= 0`
    Nonneg(AffineExpr),
    /// `||entries|| <= bound`
    Soc {
        bound: AffineExpr,
        entries: Vec<AffineExpr>,
    },
    /// `value <= log_base(arg)`
    LogEpi {
        value: AffineExpr,
        arg: AffineExpr,
        base: f64,
    },
}

impl Constraint {
    fn exprs(&self) -> Vec<&AffineExpr> {
        match self {
            Constraint::Eq(e) | Constraint::Nonneg(e) => vec![e],
            Constraint::Soc { bound, entries } => std::iter::once(bound).chain(entries).collect(),
            Constraint::LogEpi { value, arg, .. } => vec![value, arg],
        }
    }

    /// Amount by which `x` violates the constraint (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Constraint::Eq(e) => e.eval(x).abs(),
            Constraint::Nonneg(e) => (-e.eval(x)).max(0.0),
            Constraint::Soc { bound, entries } => {
                let norm = entries.iter().map(|e| e.eval(x).powi(2)).sum::<f64>().sqrt();
                (norm - bound.eval(x)).max(0.0)
            }
            Constraint::LogEpi { value, arg, base } => {
                let u = arg.eval(x);
                if u <= 0.0 {
                    f64::INFINITY
                } else {
                    (value.eval(x) - u.ln() / base.ln()).max(0.0)
                }
            }
        }
    }
}

/// Constraint counts by type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Census {
    pub equalities: usize,
    pub inequalities: usize,
    pub second_order: usize,
    pub log_epigraph: usize,
    pub psd_blocks: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConicProgram {
    vars: Vec<VarDecl>,
    n_coords: usize,
    objective: AffineExpr,
    constraints: Vec<Constraint>,
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_scalar(&mut self, name: impl Into<String>) -> ScalarVar {
        let offset = self.declare(name.into(), VarKind::Scalar);
        ScalarVar(offset)
    }

    pub fn add_hermitian_psd(&mut self, name: impl Into<String>, n: usize) -> HermitianVar {
        let offset = self.declare(name.into(), VarKind::HermitianPsd(n));
        HermitianVar { offset, n }
    }

    fn declare(&mut self, name: String, kind: VarKind) -> usize {
        let offset = self.n_coords;
        self.vars.push(VarDecl { name, kind, offset });
        self.n_coords += kind.n_coords();
        offset
    }

    /// Set the affine function to maximize.
    pub fn maximize(&mut self, objective: AffineExpr) {
        self.objective = objective.compact();
    }

    pub fn add_eq(&mut self, e: AffineExpr) {
        self.constraints.push(Constraint::Eq(e.compact()));
    }

    pub fn add_nonneg(&mut self, e: AffineExpr) {
        self.constraints.push(Constraint::Nonneg(e.compact()));
    }

    /// `lhs <= rhs`.
    pub fn add_le(&mut self, lhs: AffineExpr, rhs: AffineExpr) {
        self.add_nonneg(rhs.minus(&lhs));
    }

    pub fn add_soc(&mut self, bound: AffineExpr, entries: Vec<AffineExpr>) {
        self.constraints.push(Constraint::Soc {
            bound: bound.compact(),
            entries: entries.into_iter().map(AffineExpr::compact).collect(),
        });
    }

    /// `value <= log_base(arg)`.
    pub fn add_log_epi(&mut self, value: AffineExpr, arg: AffineExpr, base: f64) {
        self.constraints.push(Constraint::LogEpi {
            value: value.compact(),
            arg: arg.compact(),
            base,
        });
    }

    pub fn vars(&self) -> &[VarDecl] {
        &self.vars
    }

    pub fn n_coords(&self) -> usize {
        self.n_coords
    }

    pub fn objective(&self) -> &AffineExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn hermitian_blocks(&self) -> impl Iterator<Item = HermitianVar> + '_ {
        self.vars.iter().filter_map(|v| match v.kind {
            VarKind::HermitianPsd(n) => Some(HermitianVar { offset: v.offset, n }),
            VarKind::Scalar => None,
        })
    }

    pub fn census(&self) -> Census {
        let mut c = Census {
            psd_blocks: self.hermitian_blocks().count(),
            ..Census::default()
        };
        for con in &self.constraints {
            match con {
                Constraint::Eq(_) => c.equalities += 1,
                Constraint::Nonneg(_) => c.inequalities += 1,
                Constraint::Soc { .. } => c.second_order += 1,
                Constraint::LogEpi { .. } => c.log_epigraph += 1,
            }
        }
        c
    }

    /// Structural checks: coordinates in range, positive log bases,
    /// contiguous variable layout.
    pub fn validate(&self) -> Result<()> {
        let mut next = 0;
        for v in &self.vars {
            if v.offset != next {
                return Err(validation(format!("variable {} has a non-contiguous offset", v.name)));
            }
            if v.kind == VarKind::HermitianPsd(0) {
                return Err(validation(format!("block {} has side 0", v.name)));
            }
            next += v.kind.n_coords();
        }
        if next != self.n_coords {
            return Err(validation("coordinate count does not match declarations"));
        }
        let exprs = std::iter::once(&self.objective).chain(self.constraints.iter().flat_map(|c| c.exprs()));
        for e in exprs {
            if e.max_coord().is_some_and(|c| c >= self.n_coords) {
                return Err(validation("expression references an undeclared coordinate"));
            }
            if !e.constant.is_finite() || e.terms.iter().any(|t| !t.1.is_finite()) {
                return Err(validation("expression has a non-finite coefficient"));
            }
        }
        for c in &self.constraints {
            if let Constraint::LogEpi { base, .. } = c {
                if !(*base > 0.0 && *base != 1.0) {
                    return Err(validation(format!("invalid log base {base}")));
                }
            }
        }
        Ok(())
    }

    /// Largest constraint violation at `x`, including negative eigenvalues
    /// of the PSD blocks.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let cons = self.constraints.iter().map(|c| c.violation(x)).fold(0.0, f64::max);
        let psd = self
            .hermitian_blocks()
            .map(|b| {
                let (vals, _) = crate::linalg::hermitian_eigen(&b.value(x));
                (-vals[vals.len() - 1]).max(0.0)
            })
            .fold(0.0, f64::max);
        cons.max(psd)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConicStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalTrouble,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub status: ConicStatus,
    /// Primal coordinates; meaningful when `status` is `Optimal`.
    pub x: Vec<f64>,
    pub objective: f64,
    /// Largest primal constraint violation at `x`.
    pub max_violation: f64,
    pub iterations: u32,
}

impl ConicSolution {
    pub fn scalar(&self, v: ScalarVar) -> f64 {
        self.x[v.0]
    }

    pub fn hermitian(&self, v: &HermitianVar) -> CMatrix {
        v.value(&self.x)
    }
}
