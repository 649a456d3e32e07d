//! Scenario files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use noma_isac::scene::{dbm_to_mw, default_user_distances};
use noma_isac::{ArrayGeometry, ScenarioConfig};

use crate::error::{HarnessError, Result};

/// A minimum rate shared by every user or one per user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Uniform(f64),
    PerUser(Vec<f64>),
}

/// On-disk scenario description. Powers are in dBm, angles in degrees,
/// per-user lists in configuration order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub n_antennas: usize,
    #[serde(default = "default_spacing")]
    pub spacing_ratio: f64,
    pub n_users: usize,
    pub target_angles_deg: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub user_distances_m: Option<Vec<f64>>,
    pub total_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub min_rate_bpshz: RateSpec,
    pub power_diff_cap: f64,
    pub crosscorr_cap: f64,
    pub spatial_factor: f64,
    pub weight_comm: f64,
    pub weight_radar: f64,
}

fn default_spacing() -> f64 {
    ArrayGeometry::DEFAULT_SPACING_RATIO
}

impl ScenarioFile {
    pub fn into_config(self) -> Result<ScenarioConfig> {
        let min_rate_bpshz = match self.min_rate_bpshz {
            RateSpec::Uniform(r) => vec![r; self.n_users],
            RateSpec::PerUser(v) => v,
        };
        let config = ScenarioConfig {
            geometry: ArrayGeometry {
                n_antennas: self.n_antennas,
                spacing_ratio: self.spacing_ratio,
            },
            n_users: self.n_users,
            target_angles_deg: self.target_angles_deg,
            user_distances_m: self
                .user_distances_m
                .unwrap_or_else(|| default_user_distances(self.n_users)),
            total_power_mw: dbm_to_mw(self.total_power_dbm),
            noise_power_mw: dbm_to_mw(self.noise_power_dbm),
            min_rate_bpshz,
            power_diff_cap: self.power_diff_cap,
            crosscorr_cap: self.crosscorr_cap,
            spatial_factor: self.spatial_factor,
            weight_comm: self.weight_comm,
            weight_radar: self.weight_radar,
        };
        config.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(config)
    }
}

/// Parse a scenario from JSON text. Errors name the offending key and the
/// line and column.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ScenarioFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "." {
            HarnessError::Config(e.inner().to_string())
        } else {
            HarnessError::Config(format!("key `{path}`: {}", e.inner()))
        }
    })?;
    file.into_config()
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| match e {
        HarnessError::Config(msg) => HarnessError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const REFERENCE: &str = r#"{
        "n_antennas": 4, "n_users": 2, "target_angles_deg": [-40, 40],
        "total_power_dbm": 20, "noise_power_dbm": -120, "min_rate_bpshz": 1,
        "power_diff_cap": 10, "crosscorr_cap": 10, "spatial_factor": 0,
        "weight_comm": 10, "weight_radar": 1
    }"#;

    #[test]
    fn reference_file_matches_reference_config() {
        let got = parse_config(REFERENCE).unwrap();
        let want = ScenarioConfig::reference(2, 0.0, 10.0, 1.0);
        assert_eq!(got.user_distances_m, want.user_distances_m);
        assert_eq!(got.min_rate_bpshz, want.min_rate_bpshz);
        assert!((got.total_power_mw - 100.0).abs() < 1e-12);
        assert!((got.noise_power_mw - 1e-12).abs() < 1e-24);
        assert_eq!(got.geometry, want.geometry);
    }

    #[test]
    fn wrong_type_names_the_key() {
        let text = REFERENCE.replace("\"n_users\": 2", "\"n_users\": \"two\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("n_users") && err.contains("line"), "{err}");
    }

    #[test]
    fn unknown_and_missing_keys_are_named() {
        let text = REFERENCE.replace("\"spatial_factor\"", "\"spatial_fator\"");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("spatial_fator"), "{err}");
        let text = REFERENCE.replace("\"weight_radar\": 1", "\"extra\": 1");
        let err = parse_config(&text).unwrap_err().to_string();
        assert!(err.contains("extra"), "{err}");
    }

    #[test]
    fn per_user_rates_are_accepted() {
        let text = REFERENCE.replace("\"min_rate_bpshz\": 1", "\"min_rate_bpshz\": [2, 0.5]");
        assert_eq!(parse_config(&text).unwrap().min_rate_bpshz, vec![2.0, 0.5]);
    }

    #[test]
    fn semantic_errors_are_config_errors() {
        let text = REFERENCE.replace("\"spatial_factor\": 0", "\"spatial_factor\": 2");
        let err = parse_config(&text).unwrap_err();
        assert!(
            matches!(err, HarnessError::Config(ref m) if m.contains("spatial_factor")),
            "{err}"
        );
    }
}
