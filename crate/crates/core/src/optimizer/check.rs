use serde::{Deserialize, Serialize};

use super::assemble::NOISE;
use super::{RateModel, Scheme};
use crate::error::Result;
use crate::linalg::hermitian_eigen;
use crate::metrics::{noma_rates_cov, radar_metrics, sdma_rates_cov, BeamformerSet, CovarianceSet};
use crate::scene::Scene;

/// Worst-case slack of each constraint family at a point. Positive excess
/// means violation. Families a scheme does not impose are `-inf`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    /// `max_k (R_min,k - R_k)`, bit/s/Hz.
    pub rate_shortfall: f64,
    /// `max_n |[sum W]_nn - P_t/N| / (P_t/N)`.
    pub per_antenna_rel_dev: f64,
    /// `max_{k,p} |P_k - P_p| - P_diff`, mW.
    pub power_diff_excess: f64,
    /// `C - xi`, mW^2.
    pub crosscorr_excess: f64,
    /// Smallest eigenvalue over all covariances, mW.
    pub min_eigenvalue: f64,
}

/// Evaluate the design constraints at `covs` with general-rank rates.
pub fn check_constraints(scene: &Scene, scheme: Scheme, covs: &CovarianceSet) -> Result<ConstraintCheck> {
    let cfg = &scene.config;
    let h = &scene.channels.channels;
    let rate_shortfall = match scheme.rate_model() {
        Some(model) => {
            let rates = match model {
                RateModel::Noma => noma_rates_cov(covs, h, NOISE)?,
                RateModel::Sdma => sdma_rates_cov(covs, h, NOISE)?,
            };
            rates
                .iter()
                .zip(scene.min_rates())
                .map(|(r, m)| m - r)
                .fold(f64::NEG_INFINITY, f64::max)
        }
        None => f64::NEG_INFINITY,
    };
    let total = covs.total();
    let target = cfg.total_power_mw / cfg.geometry.n_antennas as f64;
    let per_antenna_rel_dev = (0..total.nrows())
        .map(|i| (total[(i, i)].re - target).abs() / target)
        .fold(0.0, f64::max);
    let (power_diff_excess, crosscorr_excess) = if scheme.senses() {
        let radar = radar_metrics(&total, &cfg.target_angles_deg, &cfg.geometry)?;
        let p = &radar.beampattern_mw;
        let spread =
            p.iter().copied().fold(f64::NEG_INFINITY, f64::max) - p.iter().copied().fold(f64::INFINITY, f64::min);
        (spread - cfg.power_diff_cap, radar.mean_sq_crosscorr - cfg.crosscorr_cap)
    } else {
        (f64::NEG_INFINITY, f64::NEG_INFINITY)
    };
    let min_eigenvalue = covs
        .matrices
        .iter()
        .map(|w| *hermitian_eigen(w).0.last().unwrap())
        .fold(f64::INFINITY, f64::min);
    Ok(ConstraintCheck {
        rate_shortfall,
        per_antenna_rel_dev,
        power_diff_excess,
        crosscorr_excess,
        min_eigenvalue,
    })
}

/// [`check_constraints`] at the covariances of rank-one beamformers.
pub fn check_beamformers(scene: &Scene, scheme: Scheme, beams: &BeamformerSet) -> Result<ConstraintCheck> {
    check_constraints(scene, scheme, &beams.to_covariances())
}
