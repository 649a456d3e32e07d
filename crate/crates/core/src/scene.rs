//! Scenario generation: array response, path loss and correlated Rayleigh
//! channels.
//!
//! User channels follow `h_k = Lambda_k^{-1/2} h~_k` where the small-scale
//! part `H~ = H_w R^{1/2}` mixes unit-norm i.i.d. Rayleigh columns with the
//! user-correlation matrix `R_ij = t^|i-j|`. Users are stored weakest first,
//! which is the NOMA decoding order.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, validation, Result};
use crate::linalg::{psd_sqrt, CVector};

/// Uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    pub n_antennas: usize,
    /// Element spacing over carrier wavelength.
    pub spacing_ratio: f64,
}

impl ArrayGeometry {
    pub const DEFAULT_SPACING_RATIO: f64 = 0.5;

    pub fn new(n_antennas: usize, spacing_ratio: f64) -> Result<Self> {
        let geometry = Self {
            n_antennas,
            spacing_ratio,
        };
        geometry.validate()?;
        Ok(geometry)
    }

    pub fn half_wavelength(n_antennas: usize) -> Self {
        Self {
            n_antennas,
            spacing_ratio: Self::DEFAULT_SPACING_RATIO,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_antennas == 0 {
            return Err(validation("n_antennas must be at least 1"));
        }
        if !(self.spacing_ratio > 0.0 && self.spacing_ratio.is_finite()) {
            return Err(validation(format!(
                "spacing_ratio must be positive, got {}",
                self.spacing_ratio
            )));
        }
        Ok(())
    }
}

/// Everything that defines one design problem apart from the channel draw.
///
/// Powers are linear milliwatts. `power_diff_cap` and `crosscorr_cap` are in
/// the units of the beampattern (mW and mW^2 respectively). Per-user vectors
/// (`user_distances_m`, `min_rate_bpshz`) are in configuration order, not in
/// decoding order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub geometry: ArrayGeometry,
    pub n_users: usize,
    pub target_angles_deg: Vec<f64>,
    pub user_distances_m: Vec<f64>,
    pub total_power_mw: f64,
    pub noise_power_mw: f64,
    pub min_rate_bpshz: Vec<f64>,
    pub power_diff_cap: f64,
    pub crosscorr_cap: f64,
    pub spatial_factor: f64,
    pub weight_comm: f64,
    pub weight_radar: f64,
}

impl ScenarioConfig {
    /// The evaluation setup: N = 4 half-wavelength ULA, targets at -40 and
    /// 40 degrees, 20 dBm budget, -120 dBm noise, users equally spaced from
    /// 50 m to 200 m with 1 bit/s/Hz minimum rate, both radar caps at 10.
    pub fn reference(n_users: usize, spatial_factor: f64, weight_comm: f64, weight_radar: f64) -> Self {
        Self {
            geometry: ArrayGeometry::half_wavelength(4),
            n_users,
            target_angles_deg: vec![-40.0, 40.0],
            user_distances_m: default_user_distances(n_users),
            total_power_mw: dbm_to_mw(20.0),
            noise_power_mw: dbm_to_mw(-120.0),
            min_rate_bpshz: vec![1.0; n_users],
            power_diff_cap: 10.0,
            crosscorr_cap: 10.0,
            spatial_factor,
            weight_comm,
            weight_radar,
        }
    }

    pub fn n_targets(&self) -> usize {
        self.target_angles_deg.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        let k = self.n_users;
        if k == 0 {
            return Err(validation("n_users must be at least 1"));
        }
        if self.target_angles_deg.is_empty() {
            return Err(validation("target_angles_deg must list at least one target"));
        }
        for (i, &a) in self.target_angles_deg.iter().enumerate() {
            if !(-90.0..=90.0).contains(&a) {
                return Err(validation(format!("target_angles_deg[{i}] = {a} is outside [-90, 90]")));
            }
            if self.target_angles_deg[..i].contains(&a) {
                return Err(validation(format!(
                    "target_angles_deg[{i}] = {a} duplicates an earlier target"
                )));
            }
        }
        if self.user_distances_m.len() != k {
            return Err(validation(format!(
                "user_distances_m has {} entries, n_users is {k}",
                self.user_distances_m.len()
            )));
        }
        if let Some(d) = self.user_distances_m.iter().find(|d| !(**d > 0.0 && d.is_finite())) {
            return Err(validation(format!(
                "user_distances_m contains nonpositive distance {d}"
            )));
        }
        if self.min_rate_bpshz.len() != k {
            return Err(validation(format!(
                "min_rate_bpshz has {} entries, n_users is {k}",
                self.min_rate_bpshz.len()
            )));
        }
        if let Some(r) = self.min_rate_bpshz.iter().find(|r| !(**r >= 0.0 && r.is_finite())) {
            return Err(validation(format!("min_rate_bpshz contains invalid rate {r}")));
        }
        for (name, v) in [
            ("total_power", self.total_power_mw),
            ("noise_power", self.noise_power_mw),
            ("power_diff_cap", self.power_diff_cap),
            ("crosscorr_cap", self.crosscorr_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(validation(format!("{name} must be positive, got {v}")));
            }
        }
        if !(0.0..=1.0).contains(&self.spatial_factor) {
            return Err(validation(format!(
                "spatial_factor must lie in [0, 1], got {}",
                self.spatial_factor
            )));
        }
        if !(self.weight_comm >= 0.0 && self.weight_radar >= 0.0) {
            return Err(validation("weights must be nonnegative"));
        }
        if self.weight_comm == 0.0 && self.weight_radar == 0.0 {
            return Err(validation("weight_comm and weight_radar cannot both be zero"));
        }
        Ok(())
    }
}

/// Per-user channels in NOMA decoding order (weakest user first).
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    /// Noise-normalized channels `h_k / sigma_n`.
    pub channels: Vec<CVector>,
    /// Path loss `Lambda_k` in dB, non-increasing along the storage order.
    pub large_scale_db: Vec<f64>,
    /// `ordering[s]` is the configuration index of the user stored at `s`.
    pub ordering: Vec<usize>,
}

impl ChannelSet {
    pub fn n_users(&self) -> usize {
        self.channels.len()
    }

    pub fn n_antennas(&self) -> usize {
        self.channels.first().map_or(0, |h| h.len())
    }

    /// Reorder a per-user configuration vector into storage order.
    pub fn to_storage_order<T: Clone>(&self, per_config_user: &[T]) -> Vec<T> {
        self.ordering.iter().map(|&i| per_config_user[i].clone()).collect()
    }
}

/// A configuration together with one channel realization.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub config: ScenarioConfig,
    pub channels: ChannelSet,
}

impl Scene {
    pub fn generate(config: ScenarioConfig, seed: u64) -> Result<Self> {
        let channels = generate_channels(&config, seed)?;
        Ok(Self { config, channels })
    }

    /// Use explicit channels, already noise-normalized and in decoding order.
    pub fn with_channels(config: ScenarioConfig, channels: ChannelSet) -> Result<Self> {
        config.validate()?;
        if channels.n_users() != config.n_users {
            return Err(validation(format!(
                "channel set has {} users, configuration has {}",
                channels.n_users(),
                config.n_users
            )));
        }
        if channels.channels.iter().any(|h| h.len() != config.geometry.n_antennas) {
            return Err(validation("channel length differs from n_antennas"));
        }
        Ok(Self { config, channels })
    }

    /// Minimum rates in storage order.
    pub fn min_rates(&self) -> Vec<f64> {
        self.channels.to_storage_order(&self.config.min_rate_bpshz)
    }

    pub fn geometry(&self) -> &ArrayGeometry {
        &self.config.geometry
    }

    pub fn steering_vectors(&self) -> Vec<CVector> {
        self.config
            .target_angles_deg
            .iter()
            .map(|&a| steering_vector(a, &self.config.geometry).expect("validated angle"))
            .collect()
    }
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// `n` distances linearly spaced over [50, 200] m, endpoints included.
pub fn default_user_distances(n: usize) -> Vec<f64> {
    const NEAR: f64 = 50.0;
    const FAR: f64 = 200.0;
    match n {
        0 => Vec::new(),
        1 => vec![NEAR],
        _ => (0..n)
            .map(|i| NEAR + (FAR - NEAR) * i as f64 / (n - 1) as f64)
            .collect(),
    }
}

/// ULA response toward `angle_deg`: entry `n` is `exp(j 2pi (d/lambda) n sin(theta))`.
pub fn steering_vector(angle_deg: f64, geometry: &ArrayGeometry) -> Result<CVector> {
    if !(-90.0..=90.0).contains(&angle_deg) {
        return Err(domain(format!("angle {angle_deg} deg is outside [-90, 90]")));
    }
    let phase = 2.0 * std::f64::consts::PI * geometry.spacing_ratio * angle_deg.to_radians().sin();
    Ok(CVector::from_fn(geometry.n_antennas, |n, _| {
        Complex64::from_polar(1.0, phase * n as f64)
    }))
}

/// Urban macro path loss in dB at `distance_m` metres.
pub fn path_loss_db(distance_m: f64) -> Result<f64> {
    if !(distance_m > 0.0) || !distance_m.is_finite() {
        return Err(domain(format!("distance must be positive, got {distance_m}")));
    }
    Ok(32.6 + 36.7 * distance_m.log10())
}

/// Exponential user-correlation matrix with entries `t^|i-j|`.
pub fn spatial_correlation_matrix(t: f64, k: usize) -> Result<DMatrix<f64>> {
    if !(0.0..=1.0).contains(&t) {
        return Err(domain(format!("spatial factor {t} is outside [0, 1]")));
    }
    Ok(DMatrix::from_fn(k, k, |i, j| t.powi(i.abs_diff(j) as i32)))
}

/// Draw channels for `config` from stream 0 of `seed`.
pub fn generate_channels(config: &ScenarioConfig, seed: u64) -> Result<ChannelSet> {
    generate_channels_substream(config, seed, 0)
}

/// Draw channels from substream `stream` of the ChaCha20 generator seeded by
/// `master_seed`. Distinct streams are independent, so Monte-Carlo trials can
/// run in any order.
pub fn generate_channels_substream(config: &ScenarioConfig, master_seed: u64, stream: u64) -> Result<ChannelSet> {
    config.validate()?;
    let n = config.geometry.n_antennas;
    let k = config.n_users;

    let losses = config
        .user_distances_m
        .iter()
        .map(|&d| path_loss_db(d))
        .collect::<Result<Vec<_>>>()?;
    let mut ordering: Vec<usize> = (0..k).collect();
    // weakest (largest loss) first; stable for equal distances
    ordering.sort_by(|&a, &b| losses[b].total_cmp(&losses[a]));

    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    let mut h_w = DMatrix::<Complex64>::zeros(n, k);
    for col in 0..k {
        for row in 0..n {
            let re: f64 = StandardNormal.sample(&mut rng);
            let im: f64 = StandardNormal.sample(&mut rng);
            h_w[(row, col)] = Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
        let norm = h_w.column(col).norm();
        h_w.column_mut(col).unscale_mut(norm);
    }

    let mix = psd_sqrt(&spatial_correlation_matrix(config.spatial_factor, k)?).map(|v| Complex64::new(v, 0.0));
    let small_scale = h_w * mix;

    let noise_amplitude = config.noise_power_mw.sqrt();
    let mut channels = Vec::with_capacity(k);
    let mut large_scale_db = Vec::with_capacity(k);
    for (slot, &user) in ordering.iter().enumerate() {
        let gain = 10f64.powf(-losses[user] / 20.0) / noise_amplitude;
        let h: CVector = small_scale.column(slot).into_owned() * Complex64::new(gain, 0.0);
        if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) || h.norm() == 0.0 {
            return Err(validation(format!("degenerate channel for user {user}")));
        }
        channels.push(h);
        large_scale_db.push(losses[user]);
    }

    Ok(ChannelSet {
        channels,
        large_scale_db,
        ordering,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn config(k: usize, t: f64) -> ScenarioConfig {
        ScenarioConfig::reference(k, t, 1.0, 1.0)
    }

    #[test]
    fn broadside_steering_is_all_ones() {
        let a = steering_vector(0.0, &ArrayGeometry::half_wavelength(5)).unwrap();
        assert!(a.iter().all(|z| (z - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn endfire_half_wavelength_alternates() {
        let a = steering_vector(90.0, &ArrayGeometry::half_wavelength(2)).unwrap();
        assert!((a[0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((a[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn steering_40_degrees() {
        let a = steering_vector(40.0, &ArrayGeometry::half_wavelength(4)).unwrap();
        // frozen from direct evaluation of exp(j pi n sin 40deg)
        let expected = [
            (1.0, 0.0),
            (-0.43368692, 0.90106363),
            (-0.62383132, -0.78155901),
            (0.97478188, -0.22315979),
        ];
        for (z, (re, im)) in a.iter().zip(expected) {
            assert!((z.re - re).abs() < 1e-8 && (z.im - im).abs() < 1e-8);
        }
        assert!((a.norm_squared() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn steering_rejects_out_of_range() {
        let g = ArrayGeometry::half_wavelength(4);
        assert!(matches!(steering_vector(91.0, &g), Err(crate::Error::Domain(_))));
        assert!(steering_vector(-90.5, &g).is_err());
    }

    #[test]
    fn path_loss_values() {
        assert!((path_loss_db(1.0).unwrap() - 32.6).abs() < 1e-12);
        assert!((path_loss_db(100.0).unwrap() - 106.0).abs() < 1e-12);
        assert!((path_loss_db(50.0).unwrap() - 94.9521991591319).abs() < 1e-10);
        assert!(path_loss_db(0.0).is_err());
        assert!(path_loss_db(-3.0).is_err());
    }

    #[test]
    fn correlation_special_cases() {
        assert_eq!(spatial_correlation_matrix(0.0, 3).unwrap(), DMatrix::identity(3, 3));
        assert_eq!(
            spatial_correlation_matrix(1.0, 3).unwrap(),
            DMatrix::from_element(3, 3, 1.0)
        );
        assert_eq!(
            spatial_correlation_matrix(0.5, 2).unwrap(),
            DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])
        );
        assert!(spatial_correlation_matrix(1.5, 2).is_err());
        assert!(spatial_correlation_matrix(-0.1, 2).is_err());
    }

    #[test]
    fn default_distances_include_endpoints() {
        assert_eq!(default_user_distances(2), vec![50.0, 200.0]);
        let d = default_user_distances(6);
        assert_eq!(d.len(), 6);
        assert_eq!(d[0], 50.0);
        assert_eq!(d[5], 200.0);
        assert!((d[1] - 80.0).abs() < 1e-12);
    }

    #[test]
    fn channels_are_deterministic() {
        let cfg = config(3, 0.4);
        assert_eq!(generate_channels(&cfg, 7).unwrap(), generate_channels(&cfg, 7).unwrap());
        assert_ne!(generate_channels(&cfg, 7).unwrap(), generate_channels(&cfg, 8).unwrap());
        assert_ne!(
            generate_channels_substream(&cfg, 7, 0).unwrap(),
            generate_channels_substream(&cfg, 7, 1).unwrap()
        );
    }

    #[test]
    fn weakest_user_is_stored_first() {
        let mut cfg = config(2, 0.0);
        cfg.user_distances_m = vec![50.0, 200.0];
        let set = generate_channels(&cfg, 1).unwrap();
        assert_eq!(set.ordering, vec![1, 0]);
        assert!(set.large_scale_db[0] > set.large_scale_db[1]);
        assert!(set.channels[0].norm() < set.channels[1].norm());
    }

    #[test]
    fn uncorrelated_channels_are_isotropic() {
        // E|h1^H h2|^2 / (|h1| |h2|)^2 = 1/N for independent isotropic vectors
        let cfg = config(2, 0.0);
        let n = cfg.geometry.n_antennas as f64;
        let trials = 10_000;
        let samples: Vec<f64> = (0..trials)
            .map(|s| {
                let set = generate_channels_substream(&cfg, 2024, s).unwrap();
                let (a, b) = (&set.channels[0], &set.channels[1]);
                a.dotc(b).norm_sqr() / (a.norm_squared() * b.norm_squared())
            })
            .collect();
        let mean = samples.iter().sum::<f64>() / trials as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (trials - 1) as f64;
        let se = (var / trials as f64).sqrt();
        assert!((mean - 1.0 / n).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn noise_normalization_scales_gain() {
        let cfg = config(1, 0.0);
        let set = generate_channels(&cfg, 3).unwrap();
        // unit-norm small-scale part, so |h|^2 = Lambda^-1 / sigma^2
        let expected = 10f64.powf(-set.large_scale_db[0] / 10.0) / cfg.noise_power_mw;
        assert!((set.channels[0].norm_squared() / expected - 1.0).abs() < 1e-12);
    }

    #[test]
    fn config_validation_names_field() {
        let mut cfg = config(2, 0.0);
        cfg.target_angles_deg = vec![10.0, 10.0];
        let err = cfg.validate().unwrap_err().to_string();
        assert!(err.contains("target_angles_deg"), "{err}");
        let mut cfg = config(2, 0.0);
        cfg.weight_comm = 0.0;
        cfg.weight_radar = 0.0;
        assert!(cfg.validate().is_err());
    }

    proptest! {
        #[test]
        fn steering_entries_unit_modulus(angle in -90.0f64..=90.0, n in 1usize..12, ratio in 0.1f64..2.0) {
            let a = steering_vector(angle, &ArrayGeometry::new(n, ratio).unwrap()).unwrap();
            for z in a.iter() {
                prop_assert!((z.norm() - 1.0).abs() < 1e-12);
            }
            prop_assert!((a.norm_squared() - n as f64).abs() < 1e-10);
        }

        #[test]
        fn correlation_is_psd(t in 0.0f64..=1.0, k in 1usize..=8) {
            let r = spatial_correlation_matrix(t, k).unwrap();
            let eig = nalgebra::SymmetricEigen::new(r);
            prop_assert!(eig.eigenvalues.iter().all(|&v| v > -1e-12));
        }

        #[test]
        fn ordering_sorted_by_loss(seed in 0u64..1000, k in 1usize..6) {
            let mut cfg = config(k, 0.3);
            cfg.user_distances_m = (0..k).map(|i| 40.0 + ((i * 37 + seed as usize) % 160) as f64).collect();
            let set = generate_channels(&cfg, seed).unwrap();
            prop_assert!(set.large_scale_db.windows(2).all(|w| w[0] >= w[1]));
        }
    }
}
