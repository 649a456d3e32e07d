//! Rate and sensing evaluators.
//!
//! User indices are zero-based and follow the storage (decoding) order of
//! [`ChannelSet`](crate::scene::ChannelSet): index 0 is the weakest user.
//! Every rate function takes the noise power explicitly; channels produced by
//! [`scene`](crate::scene) are noise-normalized, so the optimizer passes 1.

use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::linalg::{hermitian_defect, hermitian_eigen, quad_form, CMatrix, CVector};
use crate::scene::{steering_vector, ArrayGeometry};

/// Hermitian tolerance used by the validating evaluators.
pub const HERMITIAN_TOL: f64 = 1e-9;

/// Rank-one beamformers `w_k`, entries in sqrt(mW).
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformerSet {
    pub vectors: Vec<CVector>,
}

impl BeamformerSet {
    pub fn new(vectors: Vec<CVector>) -> Result<Self> {
        if vectors.is_empty() {
            return Err(validation("beamformer set is empty"));
        }
        let n = vectors[0].len();
        if vectors.iter().any(|w| w.len() != n) {
            return Err(validation("beamformers have different lengths"));
        }
        if vectors
            .iter()
            .flat_map(|w| w.iter())
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(validation("beamformer entries must be finite"));
        }
        Ok(Self { vectors })
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn to_covariances(&self) -> CovarianceSet {
        CovarianceSet {
            matrices: self.vectors.iter().map(|w| w * w.adjoint()).collect(),
        }
    }
}

/// Per-user covariance matrices `W_k` (mW), the optimizer's variables.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceSet {
    pub matrices: Vec<CMatrix>,
}

impl CovarianceSet {
    pub fn len(&self) -> usize {
        self.matrices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.matrices.is_empty()
    }

    /// `sum_k W_k`.
    pub fn total(&self) -> CMatrix {
        let n = self.matrices[0].nrows();
        self.matrices.iter().fold(CMatrix::zeros(n, n), |acc, w| acc + w)
    }

    /// Check Hermitian symmetry and PSD-ness up to `eig >= -1e-9 * trace`.
    pub fn validate(&self) -> Result<()> {
        for (k, w) in self.matrices.iter().enumerate() {
            if hermitian_defect(w) > HERMITIAN_TOL * (1.0 + w.norm()) {
                return Err(validation(format!("W[{k}] is not Hermitian")));
            }
            let (vals, _) = hermitian_eigen(w);
            let trace = w.trace().re.abs();
            if vals.last().copied().unwrap_or(0.0) < -1e-9 * trace.max(1e-300) {
                return Err(validation(format!("W[{k}] is not positive semidefinite")));
            }
        }
        Ok(())
    }
}

/// Sensing figures for one transmit covariance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarMetrics {
    /// `P(theta_m)` for every target, mW.
    pub beampattern_mw: Vec<f64>,
    pub mean_sq_crosscorr: f64,
    pub sum_power_mw: f64,
}

impl RadarMetrics {
    pub fn min_target_power(&self) -> f64 {
        self.beampattern_mw.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// `R_w = sum_i w_i w_i^H`.
pub fn transmit_covariance(beams: &BeamformerSet) -> CMatrix {
    beams.to_covariances().total()
}

/// Transmit power toward `angle_deg`: `a^H R a`.
pub fn beampattern_power(cov: &CMatrix, angle_deg: f64, geometry: &ArrayGeometry) -> Result<f64> {
    check_covariance(cov, geometry)?;
    let a = steering_vector(angle_deg, geometry)?;
    Ok(quad_form(&a, cov, &a).re.max(0.0))
}

/// Mean squared cross-correlation over all unordered target pairs. A single
/// target has no pairs and yields 0.
pub fn mean_sq_crosscorr(cov: &CMatrix, angles_deg: &[f64], geometry: &ArrayGeometry) -> Result<f64> {
    check_covariance(cov, geometry)?;
    check_distinct(angles_deg)?;
    let m = angles_deg.len();
    if m < 2 {
        return Ok(0.0);
    }
    let steer = angles_deg
        .iter()
        .map(|&a| steering_vector(a, geometry))
        .collect::<Result<Vec<_>>>()?;
    let mut acc = 0.0;
    for k in 0..m {
        for p in k + 1..m {
            acc += quad_form(&steer[k], cov, &steer[p]).norm_sqr();
        }
    }
    Ok(2.0 * acc / (m * m - m) as f64)
}

pub fn radar_metrics(cov: &CMatrix, angles_deg: &[f64], geometry: &ArrayGeometry) -> Result<RadarMetrics> {
    let beampattern_mw = angles_deg
        .iter()
        .map(|&a| beampattern_power(cov, a, geometry))
        .collect::<Result<Vec<_>>>()?;
    let sum_power_mw = beampattern_mw.iter().sum();
    Ok(RadarMetrics {
        beampattern_mw,
        mean_sq_crosscorr: mean_sq_crosscorr(cov, angles_deg, geometry)?,
        sum_power_mw,
    })
}

/// Rate at which user `j` decodes the symbol of user `k <= j` while treating
/// every stronger user `i > k` as noise.
pub fn noma_pair_rate(beams: &BeamformerSet, channels: &[CVector], k: usize, j: usize, noise: f64) -> Result<f64> {
    check_dims(beams.len(), beams.vectors[0].len(), channels)?;
    let gains = |i: usize| channels[j].dotc(&beams.vectors[i]).norm_sqr();
    pair_rate(gains, beams.len(), k, j, noise)
}

/// General-rank form of [`noma_pair_rate`] with `|h^H w|^2` replaced by `h^H W h`.
pub fn noma_pair_rate_cov(covs: &CovarianceSet, channels: &[CVector], k: usize, j: usize, noise: f64) -> Result<f64> {
    check_dims(covs.len(), covs.matrices[0].nrows(), channels)?;
    let gains = |i: usize| received_power(&channels[j], &covs.matrices[i]);
    pair_rate(gains, covs.len(), k, j, noise)
}

/// Achievable NOMA rates: `R_k = min_{j >= k} R_{k->j}`; the strongest user
/// decodes interference-free.
pub fn noma_rates(beams: &BeamformerSet, channels: &[CVector], noise: f64) -> Result<Vec<f64>> {
    check_dims(beams.len(), beams.vectors[0].len(), channels)?;
    let n_users = beams.len();
    (0..n_users)
        .map(|k| {
            (k..n_users)
                .map(|j| noma_pair_rate(beams, channels, k, j, noise))
                .try_fold(f64::INFINITY, |acc, r| r.map(|r| acc.min(r)))
        })
        .collect()
}

pub fn noma_rates_cov(covs: &CovarianceSet, channels: &[CVector], noise: f64) -> Result<Vec<f64>> {
    check_dims(covs.len(), covs.matrices[0].nrows(), channels)?;
    let n_users = covs.len();
    (0..n_users)
        .map(|k| {
            (k..n_users)
                .map(|j| noma_pair_rate_cov(covs, channels, k, j, noise))
                .try_fold(f64::INFINITY, |acc, r| r.map(|r| acc.min(r)))
        })
        .collect()
}

/// Conventional multi-user rates: every other user is interference.
pub fn sdma_rates(beams: &BeamformerSet, channels: &[CVector], noise: f64) -> Result<Vec<f64>> {
    check_dims(beams.len(), beams.vectors[0].len(), channels)?;
    Ok((0..beams.len())
        .map(|k| {
            let gains: Vec<f64> = beams.vectors.iter().map(|w| channels[k].dotc(w).norm_sqr()).collect();
            sdma_rate(&gains, k, noise)
        })
        .collect())
}

pub fn sdma_rates_cov(covs: &CovarianceSet, channels: &[CVector], noise: f64) -> Result<Vec<f64>> {
    check_dims(covs.len(), covs.matrices[0].nrows(), channels)?;
    Ok((0..covs.len())
        .map(|k| {
            let gains: Vec<f64> = covs.matrices.iter().map(|w| received_power(&channels[k], w)).collect();
            sdma_rate(&gains, k, noise)
        })
        .collect())
}

/// `rho_c * sum(rates) + rho_r * sum_m P(theta_m)`.
pub fn weighted_objective(rates: &[f64], radar: &RadarMetrics, rho_c: f64, rho_r: f64) -> f64 {
    rho_c * rates.iter().sum::<f64>() + rho_r * radar.sum_power_mw
}

/// `h^H W h`, real for Hermitian `W`.
pub fn received_power(h: &CVector, w: &CMatrix) -> f64 {
    quad_form(h, w, h).re
}

fn pair_rate(gain: impl Fn(usize) -> f64, n_users: usize, k: usize, j: usize, noise: f64) -> Result<f64> {
    if j < k {
        return Err(domain(format!(
            "user {j} cannot decode user {k}: SIC order requires j >= k"
        )));
    }
    if j >= n_users {
        return Err(domain(format!("user index {j} out of range for {n_users} users")));
    }
    let interference: f64 = (k + 1..n_users).map(&gain).sum();
    Ok((1.0 + gain(k) / (interference + noise)).log2())
}

fn sdma_rate(gains: &[f64], k: usize, noise: f64) -> f64 {
    let interference: f64 = gains.iter().enumerate().filter(|(i, _)| *i != k).map(|(_, g)| g).sum();
    (1.0 + gains[k] / (interference + noise)).log2()
}

fn check_dims(n_users: usize, n_antennas: usize, channels: &[CVector]) -> Result<()> {
    if channels.len() != n_users {
        return Err(validation(format!("{} channels for {n_users} users", channels.len())));
    }
    if channels.iter().any(|h| h.len() != n_antennas) {
        return Err(validation(format!(
            "channel length differs from beamformer length {n_antennas}"
        )));
    }
    Ok(())
}

fn check_covariance(cov: &CMatrix, geometry: &ArrayGeometry) -> Result<()> {
    if cov.nrows() != geometry.n_antennas || cov.ncols() != geometry.n_antennas {
        return Err(validation(format!(
            "covariance is {}x{}, array has {} antennas",
            cov.nrows(),
            cov.ncols(),
            geometry.n_antennas
        )));
    }
    if hermitian_defect(cov) > HERMITIAN_TOL * (1.0 + cov.norm()) {
        return Err(validation("covariance is not Hermitian"));
    }
    Ok(())
}

fn check_distinct(angles: &[f64]) -> Result<()> {
    for (i, a) in angles.iter().enumerate() {
        if angles[..i].contains(a) {
            return Err(validation(format!("duplicate target angle {a}")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn vec_c(v: &[(f64, f64)]) -> CVector {
        CVector::from_iterator(v.len(), v.iter().map(|&(r, i)| c(r, i)))
    }

    fn beams(v: Vec<CVector>) -> BeamformerSet {
        BeamformerSet::new(v).unwrap()
    }

    #[test]
    fn covariance_of_single_beam() {
        let w = vec_c(&[(10f64.sqrt(), 0.0), (0.0, 0.0), (0.0, 0.0)]);
        let r = transmit_covariance(&beams(vec![w]));
        assert!((r[(0, 0)].re - 10.0).abs() < 1e-12);
        assert!(r.iter().enumerate().all(|(i, z)| i == 0 || z.norm() == 0.0));
    }

    #[test]
    fn covariance_trace_orthogonal_pair() {
        let w1 = vec_c(&[(2f64.sqrt(), 0.0), (0.0, 0.0)]);
        let w2 = vec_c(&[(0.0, 0.0), (0.0, 3f64.sqrt())]);
        let r = transmit_covariance(&beams(vec![w1, w2]));
        assert!((r.trace().re - 5.0).abs() < 1e-12);
        let set = CovarianceSet { matrices: vec![r] };
        set.validate().unwrap();
    }

    #[test]
    fn isotropic_beampattern_is_flat() {
        let g = ArrayGeometry::half_wavelength(4);
        let r = CMatrix::identity(4, 4) * c(100.0 / 4.0, 0.0);
        for angle in [-90.0, -40.0, 0.0, 13.0, 90.0] {
            assert!((beampattern_power(&r, angle, &g).unwrap() - 100.0).abs() < 1e-10);
        }
    }

    #[test]
    fn coherent_gain_toward_steered_direction() {
        let g = ArrayGeometry::half_wavelength(4);
        let a = steering_vector(25.0, &g).unwrap();
        let p = 3.0;
        let r = (&a * a.adjoint()) * c(p / 4.0, 0.0);
        assert!((beampattern_power(&r, 25.0, &g).unwrap() - 4.0 * p).abs() < 1e-10);
    }

    #[test]
    fn beampattern_rejects_non_hermitian() {
        let g = ArrayGeometry::half_wavelength(2);
        let r = CMatrix::from_row_slice(2, 2, &[c(1.0, 0.0), c(1.0, 0.0), c(0.0, 0.0), c(1.0, 0.0)]);
        assert!(matches!(
            beampattern_power(&r, 0.0, &g),
            Err(crate::Error::Validation(_))
        ));
    }

    #[test]
    fn crosscorr_two_targets_has_unit_coefficient() {
        let g = ArrayGeometry::half_wavelength(4);
        let w = vec_c(&[(1.0, 0.2), (0.3, -0.5), (0.0, 1.0), (-0.7, 0.1)]);
        let r = &w * w.adjoint();
        let a1 = steering_vector(-30.0, &g).unwrap();
        let a2 = steering_vector(50.0, &g).unwrap();
        let direct = quad_form(&a1, &r, &a2).norm_sqr();
        let value = mean_sq_crosscorr(&r, &[-30.0, 50.0], &g).unwrap();
        assert!((value - direct).abs() < 1e-12 * direct.max(1.0));
        assert_eq!(
            mean_sq_crosscorr(&CMatrix::zeros(4, 4), &[-30.0, 50.0], &g).unwrap(),
            0.0
        );
        assert_eq!(mean_sq_crosscorr(&r, &[10.0], &g).unwrap(), 0.0);
        assert!(mean_sq_crosscorr(&r, &[10.0, 10.0], &g).is_err());
    }

    #[test]
    fn pair_rate_unit_sinr() {
        // strongest-user pattern: no stronger interferers, |h^H w|^2 = sigma^2
        let h = vec![vec_c(&[(0.0, 0.0), (0.0, 0.0)]), vec_c(&[(2.0, 0.0), (0.0, 0.0)])];
        let w = beams(vec![vec_c(&[(0.0, 0.0), (1.0, 0.0)]), vec_c(&[(0.5, 0.0), (0.0, 0.0)])]);
        assert!((noma_pair_rate(&w, &h, 1, 1, 1.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pair_rate_sinr_arithmetic() {
        // signal 3 sigma^2, interference sigma^2 -> log2(1 + 1.5)
        let sigma2: f64 = 0.5;
        let h = vec![vec_c(&[(1.0, 0.0), (1.0, 0.0)]), vec_c(&[(1.0, 0.0), (1.0, 0.0)])];
        let w = beams(vec![
            vec_c(&[((3.0 * sigma2).sqrt(), 0.0), (0.0, 0.0)]),
            vec_c(&[(0.0, 0.0), (sigma2.sqrt(), 0.0)]),
        ]);
        let r = noma_pair_rate(&w, &h, 0, 0, sigma2).unwrap();
        assert!((r - 2.5f64.log2()).abs() < 1e-12);
        assert!((r - 1.321928094887362).abs() < 1e-12);
    }

    #[test]
    fn pair_rate_zero_beam_and_order() {
        let h = vec![vec_c(&[(1.0, 0.0)]), vec_c(&[(2.0, 0.0)])];
        let w = beams(vec![vec_c(&[(0.0, 0.0)]), vec_c(&[(1.0, 0.0)])]);
        assert_eq!(noma_pair_rate(&w, &h, 0, 1, 1.0).unwrap(), 0.0);
        assert!(matches!(
            noma_pair_rate(&w, &h, 1, 0, 1.0),
            Err(crate::Error::Domain(_))
        ));
    }

    #[test]
    fn noma_rate_is_min_over_decoders() {
        // R_{1->1} = 2 and R_{1->2} = 1.5 by construction
        let a = 3f64.sqrt();
        let b = (2f64.powf(1.5) - 1.0).sqrt();
        let h = vec![vec_c(&[(a, 0.0), (0.0, 0.0)]), vec_c(&[(b, 0.0), (0.0, 0.0)])];
        let w = beams(vec![vec_c(&[(1.0, 0.0), (0.0, 0.0)]), vec_c(&[(0.0, 0.0), (1.0, 0.0)])]);
        assert!((noma_pair_rate(&w, &h, 0, 0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((noma_pair_rate(&w, &h, 0, 1, 1.0).unwrap() - 1.5).abs() < 1e-12);
        let rates = noma_rates(&w, &h, 1.0).unwrap();
        assert!((rates[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn zero_beams_give_zero_rates() {
        let h = vec![vec_c(&[(1.0, 0.0), (0.5, 0.5)]); 3];
        let w = beams(vec![CVector::zeros(2); 3]);
        assert!(noma_rates(&w, &h, 1.0).unwrap().iter().all(|&r| r == 0.0));
        assert!(sdma_rates(&w, &h, 1.0).unwrap().iter().all(|&r| r == 0.0));
    }

    #[test]
    fn single_user_schemes_agree() {
        let h = vec![vec_c(&[(1.0, -0.4), (0.5, 0.5), (0.2, 0.0)])];
        let w = beams(vec![vec_c(&[(0.3, 0.1), (1.0, 0.0), (0.0, -2.0)])]);
        let g = h[0].dotc(&w.vectors[0]).norm_sqr();
        let expected = (1.0 + g / 0.7).log2();
        assert_eq!(noma_rates(&w, &h, 0.7).unwrap(), sdma_rates(&w, &h, 0.7).unwrap());
        assert!((noma_rates(&w, &h, 0.7).unwrap()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn sdma_symmetric_swap() {
        let h1 = vec_c(&[(1.0, 0.2), (0.4, -0.3)]);
        let h2 = vec_c(&[(0.1, 0.9), (-0.6, 0.0)]);
        let w1 = vec_c(&[(0.8, 0.0), (0.1, 0.3)]);
        let w2 = vec_c(&[(0.2, -0.5), (0.7, 0.0)]);
        let r = sdma_rates(&beams(vec![w1.clone(), w2.clone()]), &[h1.clone(), h2.clone()], 1.0).unwrap();
        let s = sdma_rates(&beams(vec![w2, w1]), &[h2, h1], 1.0).unwrap();
        assert!((r[0] - s[1]).abs() < 1e-14 && (r[1] - s[0]).abs() < 1e-14);
    }

    #[test]
    fn sdma_orthogonal_users_are_interference_free() {
        let h = vec![vec_c(&[(2.0, 0.0), (0.0, 0.0)]), vec_c(&[(0.0, 0.0), (0.0, 3.0)])];
        let w = beams(vec![vec_c(&[(1.0, 0.0), (0.0, 0.0)]), vec_c(&[(0.0, 0.0), (0.5, 0.0)])]);
        let r = sdma_rates(&w, &h, 1.0).unwrap();
        assert!((r[0] - 5f64.log2()).abs() < 1e-12);
        assert!((r[1] - (1.0 + 2.25f64).log2()).abs() < 1e-12);
    }

    #[test]
    fn weighted_objective_arithmetic() {
        let radar = RadarMetrics {
            beampattern_mw: vec![120.0, 180.0],
            mean_sq_crosscorr: 0.0,
            sum_power_mw: 300.0,
        };
        let rates = [5.0, 7.0];
        assert_eq!(weighted_objective(&rates, &radar, 1.0, 0.0), 12.0);
        assert_eq!(weighted_objective(&rates, &radar, 0.0, 1.0), 300.0);
        assert_eq!(weighted_objective(&rates, &radar, 10.0, 1.0), 420.0);
    }

    #[test]
    fn dimension_mismatch_is_rejected() {
        let h = vec![vec_c(&[(1.0, 0.0), (0.0, 0.0)])];
        let w = beams(vec![vec_c(&[(1.0, 0.0)])]);
        assert!(matches!(noma_rates(&w, &h, 1.0), Err(crate::Error::Validation(_))));
    }

    fn arb_cvec(n: usize) -> impl Strategy<Value = CVector> {
        proptest::collection::vec((-2.0f64..2.0, -2.0f64..2.0), n)
            .prop_map(|v| CVector::from_iterator(v.len(), v.into_iter().map(|(r, i)| c(r, i))))
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<CVector>, Vec<CVector>)> {
        (1usize..5, 1usize..5).prop_flat_map(|(k, n)| {
            (
                proptest::collection::vec(arb_cvec(n), k),
                proptest::collection::vec(arb_cvec(n), k),
            )
        })
    }

    proptest! {
        #[test]
        fn removing_stronger_beam_never_hurts((h, w) in arb_instance(), pick in 0usize..100) {
            let k_users = w.len();
            let set = beams(w.clone());
            for k in 0..k_users {
                for j in k..k_users {
                    let base = noma_pair_rate(&set, &h, k, j, 1.0).unwrap();
                    if k + 1 < k_users {
                        let drop = k + 1 + pick % (k_users - k - 1);
                        let mut w2 = w.clone();
                        w2[drop] = CVector::zeros(w2[drop].len());
                        let r = noma_pair_rate(&beams(w2), &h, k, j, 1.0).unwrap();
                        prop_assert!(r >= base - 1e-12);
                    }
                }
            }
        }

        #[test]
        fn rates_ignore_common_phase((h, w) in arb_instance(), phase in 0.0f64..6.3, who in 0usize..8) {
            let set = beams(w.clone());
            let mut rotated = w.clone();
            let idx = who % w.len();
            rotated[idx] *= Complex64::from_polar(1.0, phase);
            let rot = beams(rotated);
            for (a, b) in noma_rates(&set, &h, 1.0).unwrap().iter().zip(noma_rates(&rot, &h, 1.0).unwrap()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
            for (a, b) in sdma_rates(&set, &h, 1.0).unwrap().iter().zip(sdma_rates(&rot, &h, 1.0).unwrap()) {
                prop_assert!((a - b).abs() < 1e-10);
            }
        }

        #[test]
        fn noma_rate_below_every_pair_rate((h, w) in arb_instance()) {
            let set = beams(w);
            let rates = noma_rates(&set, &h, 1.0).unwrap();
            for k in 0..set.len() {
                for j in k..set.len() {
                    prop_assert!(rates[k] <= noma_pair_rate(&set, &h, k, j, 1.0).unwrap());
                }
            }
        }

        #[test]
        fn crosscorr_invariant_under_target_permutation(w in arb_cvec(4), angles in proptest::sample::subsequence(vec![-70.0, -40.0, -5.0, 20.0, 40.0, 65.0], 3)) {
            let g = ArrayGeometry::half_wavelength(4);
            let r = &w * w.adjoint();
            let mut rev = angles.clone();
            rev.reverse();
            let a = mean_sq_crosscorr(&r, &angles, &g).unwrap();
            let b = mean_sq_crosscorr(&r, &rev, &g).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
        }

        #[test]
        fn general_rank_rates_match_rank_one((h, w) in arb_instance()) {
            let set = beams(w);
            let covs = set.to_covariances();
            for (a, b) in noma_rates(&set, &h, 1.0).unwrap().iter().zip(noma_rates_cov(&covs, &h, 1.0).unwrap()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            for (a, b) in sdma_rates(&set, &h, 1.0).unwrap().iter().zip(sdma_rates_cov(&covs, &h, 1.0).unwrap()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }
    }
}
