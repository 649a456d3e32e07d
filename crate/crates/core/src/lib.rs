//! Transmit beamforming design for a NOMA-empowered integrated sensing and
//! communication (ISAC) base station.
//!
//! The crate is split along the data flow of a single design run:
//!
//! * [`scene`] builds scenarios: array steering vectors, path loss and
//!   spatially correlated Rayleigh channels ordered by large-scale strength.
//! * [`metrics`] evaluates NOMA/SDMA rates, beampatterns and
//!   cross-correlation for a given set of beamformers or covariances.
//! * [`conic`] is a small modelling layer for the convex subproblems
//!   (Hermitian PSD blocks, second-order and log-epigraph cones) together with
//!   a solver adapter.
//! * [`optimizer`] runs the double-layer penalty-based successive convex
//!   approximation that turns the rank-relaxed design into rank-one
//!   beamformers, for the NOMA scheme, the SDMA baseline and the two ideal
//!   single-function bounds.
//!
//! Channels are stored noise-normalized (scaled by `1/sigma_n`), so every rate
//! formula runs with unit noise while covariances stay in milliwatts.

pub mod conic;
pub mod error;
pub mod linalg;
pub mod metrics;
pub mod optimizer;
pub mod scene;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector};
pub use metrics::{BeamformerSet, CovarianceSet, RadarMetrics};
pub use optimizer::{solve, IterationState, Scheme, SolveReport, SolveStatus, SolverConfig};
pub use scene::{ArrayGeometry, ChannelSet, ScenarioConfig, Scene};
