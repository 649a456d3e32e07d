//! Tangent surrogates used by the successive convex approximation.
//!
//! All three are exact at the expansion point and bound the true function
//! from the conservative side everywhere else:
//!
//! * [`InterferenceBound`] under-estimates `-log2(noise + sum_i h^H W_i h)`
//!   (a convex function, so its tangent plane is a global lower bound).
//! * [`SurrogateRate`] adds the concave signal term, under-estimating a rate.
//! * [`SpectralSurrogate`] over-estimates `-||W||_2` through the principal
//!   eigenvector of the expansion point.
//!
//! Evaluation is written in "difference from the expansion point" form so the
//! tightness at the expansion point holds bit for bit.

use std::f64::consts::LN_2;

use crate::error::{domain, Result};
use crate::linalg::{principal_eigenpair, CMatrix, CVector};
use crate::metrics::{received_power, CovarianceSet};

/// `constant + sum_u Re Tr(C_u W_u)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearForm {
    pub constant: f64,
    pub terms: Vec<(usize, CMatrix)>,
}

impl LinearForm {
    pub fn eval(&self, w: &[CMatrix]) -> f64 {
        self.constant
            + self
                .terms
                .iter()
                .map(|(u, c)| crate::linalg::trace_product(c, &w[*u]).re)
                .sum::<f64>()
    }
}

/// Tangent of `-log2(noise + sum_{i in interferers} h^H W_i h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InterferenceBound {
    gram: CMatrix,
    interferers: Vec<usize>,
    expansion: Vec<CMatrix>,
    /// `noise + sum_i h^H W_i^n h`
    base: f64,
}

impl InterferenceBound {
    pub fn new(h: &CVector, interferers: Vec<usize>, w_n: &CovarianceSet, noise: f64) -> Self {
        let base = noise
            + interferers
                .iter()
                .map(|&i| received_power(h, &w_n.matrices[i]))
                .sum::<f64>();
        Self {
            gram: h * h.adjoint(),
            expansion: interferers.iter().map(|&i| w_n.matrices[i].clone()).collect(),
            interferers,
            base,
        }
    }

    pub fn eval(&self, w: &[CMatrix]) -> f64 {
        let delta: f64 = self
            .interferers
            .iter()
            .zip(&self.expansion)
            .map(|(&i, wn)| crate::linalg::trace_product(&self.gram, &(&w[i] - wn)).re)
            .sum();
        -self.base.log2() - delta / (self.base * LN_2)
    }

    pub fn linear_form(&self) -> LinearForm {
        let slope = -1.0 / (self.base * LN_2);
        let offset: f64 = self
            .expansion
            .iter()
            .map(|wn| crate::linalg::trace_product(&self.gram, wn).re)
            .sum();
        LinearForm {
            constant: -self.base.log2() - slope * offset,
            terms: self
                .interferers
                .iter()
                .map(|&i| (i, &self.gram * nalgebra::Complex::new(slope, 0.0)))
                .collect(),
        }
    }

    pub fn interferers(&self) -> &[usize] {
        &self.interferers
    }
}

/// Concave lower bound `log2(noise + sum_{i in signal} h^H W_i h) + F^`
/// of a single-link rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateRate {
    gram: CMatrix,
    signal_users: Vec<usize>,
    noise: f64,
    bound: InterferenceBound,
}

impl SurrogateRate {
    pub fn new(h: &CVector, user: usize, interferers: Vec<usize>, w_n: &CovarianceSet, noise: f64) -> Self {
        let mut signal_users = interferers.clone();
        signal_users.push(user);
        signal_users.sort_unstable();
        Self {
            gram: h * h.adjoint(),
            signal_users,
            noise,
            bound: InterferenceBound::new(h, interferers, w_n, noise),
        }
    }

    /// `noise + sum_{i in signal} h^H W_i h` as a linear form.
    pub fn log_argument(&self) -> LinearForm {
        LinearForm {
            constant: self.noise,
            terms: self.signal_users.iter().map(|&i| (i, self.gram.clone())).collect(),
        }
    }

    pub fn bound(&self) -> &InterferenceBound {
        &self.bound
    }

    pub fn eval(&self, w: &[CMatrix]) -> f64 {
        self.log_argument().eval(w).log2() + self.bound.eval(w)
    }
}

/// Exact `-log2(noise + sum_{i > k} h_j^H W_i h_j)`.
pub fn interference_term(j: usize, k: usize, w: &[CMatrix], channels: &[CVector], noise: f64) -> f64 {
    let power: f64 = (k + 1..w.len()).map(|i| received_power(&channels[j], &w[i])).sum();
    -(noise + power).log2()
}

/// Tangent lower bound of the NOMA interference term of the rate at which
/// user `j` decodes user `k` (zero-based, `j >= k`), expanded at `w_n`.
pub fn linearized_interference_bound(
    j: usize,
    k: usize,
    w_n: &CovarianceSet,
    channels: &[CVector],
    noise: f64,
) -> Result<InterferenceBound> {
    check_pair(j, k, w_n.len())?;
    Ok(InterferenceBound::new(
        &channels[j],
        (k + 1..w_n.len()).collect(),
        w_n,
        noise,
    ))
}

/// Concave lower bound of the NOMA pair rate `R_{k->j}` expanded at `w_n`.
pub fn surrogate_rate(
    j: usize,
    k: usize,
    w_n: &CovarianceSet,
    channels: &[CVector],
    noise: f64,
) -> Result<SurrogateRate> {
    check_pair(j, k, w_n.len())?;
    Ok(SurrogateRate::new(
        &channels[j],
        k,
        (k + 1..w_n.len()).collect(),
        w_n,
        noise,
    ))
}

/// Concave lower bound of the SDMA rate of user `k` expanded at `w_n`.
pub fn sdma_surrogate_rate(k: usize, w_n: &CovarianceSet, channels: &[CVector], noise: f64) -> Result<SurrogateRate> {
    if k >= w_n.len() {
        return Err(domain(format!("user {k} out of range")));
    }
    let others = (0..w_n.len()).filter(|&i| i != k).collect();
    Ok(SurrogateRate::new(&channels[k], k, others, w_n, noise))
}

fn check_pair(j: usize, k: usize, n_users: usize) -> Result<()> {
    if j < k || j >= n_users {
        return Err(domain(format!(
            "decoding pair (k={k}, j={j}) requires k <= j < {n_users}"
        )));
    }
    Ok(())
}

/// Upper bound `-||W_n||_2 - Tr(v v^H (W - W_n))` of `-||W||_2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralSurrogate {
    pub lambda_max: f64,
    pub eigenvector: CVector,
    expansion: CMatrix,
}

impl SpectralSurrogate {
    pub fn eval(&self, w: &CMatrix) -> f64 {
        let diff = w - &self.expansion;
        -self.lambda_max - self.eigenvector.dotc(&(&diff * &self.eigenvector)).re
    }

    /// Single-block linear form (user index 0).
    pub fn linear_form(&self) -> LinearForm {
        let vv = &self.eigenvector * self.eigenvector.adjoint();
        let anchor = crate::linalg::trace_product(&vv, &self.expansion).re;
        LinearForm {
            constant: -self.lambda_max + anchor,
            terms: vec![(0, -vv)],
        }
    }
}

pub fn spectral_norm_surrogate(w_n: &CMatrix) -> SpectralSurrogate {
    let (lambda_max, eigenvector) = principal_eigenpair(w_n);
    SpectralSurrogate {
        lambda_max,
        eigenvector,
        expansion: w_n.clone(),
    }
}
