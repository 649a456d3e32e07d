//! `report.json` and `beamformers.csv`.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use noma_isac::linalg::Complex64;
use noma_isac::optimizer::TraceEntry;
use noma_isac::{
    CMatrix, CVector, CovarianceSet, Error, RadarMetrics, ScenarioConfig, Scene, Scheme, SolveReport, SolveStatus,
    SolverConfig,
};

use crate::error::{HarnessError, Result};
use crate::format::sig;

/// Complex number as `[re, im]`.
pub type Pair = [f64; 2];

/// Serialized outcome of one design run. Per-user vectors are in decoding
/// (weakest-first) order; `user_order[s]` is the configuration index of the
/// user stored at `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scheme: Scheme,
    pub status: SolveStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    pub seed: u64,
    pub stream: u64,
    pub scenario: ScenarioConfig,
    pub solver: SolverConfig,
    pub user_order: Vec<usize>,
    pub rates_bpshz: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub throughput_bpshz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radar: Option<RadarMetrics>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub penalty_residual: Option<f64>,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
    pub beamformers: Vec<Vec<Pair>>,
    pub covariances: Vec<Vec<Vec<Pair>>>,
    pub trace: Vec<TraceEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl RunReport {
    pub fn from_outcome(
        scene: &Scene,
        seed: u64,
        stream: u64,
        scheme: Scheme,
        solver: &SolverConfig,
        outcome: &noma_isac::Result<SolveReport>,
    ) -> Self {
        let mut report = Self {
            scheme,
            status: SolveStatus::BackendFailure,
            message: None,
            seed,
            stream,
            scenario: scene.config.clone(),
            solver: solver.clone(),
            user_order: scene.channels.ordering.clone(),
            rates_bpshz: Vec::new(),
            throughput_bpshz: None,
            radar: None,
            objective: None,
            penalty_residual: None,
            inner_iterations: 0,
            outer_iterations: 0,
            beamformers: Vec::new(),
            covariances: Vec::new(),
            trace: Vec::new(),
            wall_time_s: None,
        };
        match outcome {
            Ok(r) => {
                report.status = r.status;
                report.throughput_bpshz = Some(r.sum_rate());
                report.rates_bpshz = r.rates.clone();
                report.radar = Some(r.radar.clone());
                report.objective = Some(r.objective);
                report.penalty_residual = Some(r.penalty_residual);
                report.inner_iterations = r.inner_iterations;
                report.outer_iterations = r.outer_iterations;
                report.beamformers = r
                    .beamformers
                    .vectors
                    .iter()
                    .map(|v| v.iter().map(|z| [z.re, z.im]).collect())
                    .collect();
                report.covariances = r
                    .covariances
                    .matrices
                    .iter()
                    .map(|m| {
                        m.row_iter()
                            .map(|row| row.iter().map(|z| [z.re, z.im]).collect())
                            .collect()
                    })
                    .collect();
                report.trace = r.trace.clone();
            }
            Err(e) => {
                report.status = failure_status(e);
                report.message = Some(e.to_string());
            }
        }
        report
    }

    pub fn beamformer_vectors(&self) -> Vec<CVector> {
        self.beamformers
            .iter()
            .map(|v| CVector::from_iterator(v.len(), v.iter().map(|p| Complex64::new(p[0], p[1]))))
            .collect()
    }

    /// Transmit covariance `sum_k w_k w_k^H` of the reported beamformers.
    pub fn transmit_covariance(&self) -> CMatrix {
        let n = self.scenario.geometry.n_antennas;
        self.beamformer_vectors()
            .iter()
            .fold(CMatrix::zeros(n, n), |acc, w| acc + w * w.adjoint())
    }

    pub fn covariance_set(&self) -> CovarianceSet {
        CovarianceSet {
            matrices: self
                .covariances
                .iter()
                .map(|rows| {
                    let n = rows.len();
                    CMatrix::from_fn(n, n, |i, j| Complex64::new(rows[i][j][0], rows[i][j][1]))
                })
                .collect(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Columns `user, config_index, antenna, re, im`; `user` is the
    /// decoding-order index.
    pub fn write_beamformers_csv(&self, path: &Path) -> Result<()> {
        let mut out = csv::Writer::from_writer(std::io::BufWriter::new(std::fs::File::create(path)?));
        out.write_record(["user", "config_index", "antenna", "re", "im"])?;
        for (user, w) in self.beamformers.iter().enumerate() {
            for (antenna, z) in w.iter().enumerate() {
                out.write_record([
                    user.to_string(),
                    self.user_order[user].to_string(),
                    antenna.to_string(),
                    sig(z[0]),
                    sig(z[1]),
                ])?;
            }
        }
        out.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?.flush()?;
        Ok(())
    }
}

/// Report status of a failed solve.
pub fn failure_status(e: &Error) -> SolveStatus {
    match e {
        Error::Infeasible(_) => SolveStatus::Infeasible,
        _ => SolveStatus::BackendFailure,
    }
}
