//! Single runs, weight sweeps and Monte-Carlo campaigns.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use noma_isac::metrics::beampattern_power;
use noma_isac::scene::generate_channels_substream;
use noma_isac::{ArrayGeometry, CMatrix, ScenarioConfig, Scene, Scheme, SolveStatus, SolverConfig};

use crate::config::load_config;
use crate::error::{HarnessError, Result};
use crate::format::sig;
use crate::report::RunReport;

/// Trade-off grid used when no weights are given: `rho_r = 1` and
/// `rho_c` from 0 to 10.
pub const DEFAULT_WEIGHTS: [(f64, f64); 7] = [
    (0.0, 1.0),
    (0.1, 1.0),
    (0.5, 1.0),
    (1.0, 1.0),
    (2.0, 1.0),
    (5.0, 1.0),
    (10.0, 1.0),
];

pub const DEFAULT_TRIALS: usize = 50;

/// Settings shared by every run of an invocation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunOptions {
    pub solver: SolverConfig,
    /// Worker threads; `None` uses all cores.
    pub jobs: Option<usize>,
    /// Record wall-clock time. Off by default so outputs are reproducible.
    pub timing: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub weights: Vec<(f64, f64)>,
    pub seeds: Vec<u64>,
    pub schemes: Vec<Scheme>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        if self.weights.is_empty() || self.seeds.is_empty() || self.schemes.is_empty() {
            return Err(HarnessError::Config(
                "sweep needs at least one weight pair, seed and scheme".into(),
            ));
        }
        for &(c, r) in &self.weights {
            if !(c >= 0.0 && r >= 0.0 && c.is_finite() && r.is_finite()) || (c == 0.0 && r == 0.0) {
                return Err(HarnessError::Config(format!(
                    "weights ({c}, {r}) must be nonnegative and not both zero"
                )));
            }
        }
        Ok(())
    }
}

/// One row of a sweep or campaign CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub trial: u64,
    pub scheme: Scheme,
    pub rho_c: f64,
    pub rho_r: f64,
    pub status: SolveStatus,
    pub throughput_bpshz: Option<f64>,
    pub sensing_power_mw: Option<f64>,
    pub min_target_power_mw: Option<f64>,
    pub crosscorr: Option<f64>,
    pub objective: Option<f64>,
    pub penalty_residual: Option<f64>,
    pub inner_iters_total: usize,
    pub outer_iters: usize,
    pub wall_time_s: Option<f64>,
}

pub const TRIAL_HEADER: [&str; 15] = [
    "seed",
    "trial",
    "scheme",
    "rho_c",
    "rho_r",
    "status",
    "throughput_bpshz",
    "sensing_power_mw",
    "min_target_power_mw",
    "crosscorr",
    "objective",
    "penalty_residual",
    "inner_iters_total",
    "outer_iters",
    "wall_time_s",
];

fn opt(x: Option<f64>) -> String {
    x.map(sig).unwrap_or_default()
}

impl TrialRecord {
    pub fn from_report(report: &RunReport, trial: u64) -> Self {
        Self {
            seed: report.seed,
            trial,
            scheme: report.scheme,
            rho_c: report.scenario.weight_comm,
            rho_r: report.scenario.weight_radar,
            status: report.status,
            throughput_bpshz: report.throughput_bpshz,
            sensing_power_mw: report.radar.as_ref().map(|r| r.sum_power_mw),
            min_target_power_mw: report.radar.as_ref().map(|r| r.min_target_power()),
            crosscorr: report.radar.as_ref().map(|r| r.mean_sq_crosscorr),
            objective: report.objective,
            penalty_residual: report.penalty_residual,
            inner_iters_total: report.inner_iterations,
            outer_iters: report.outer_iterations,
            wall_time_s: report.wall_time_s,
        }
    }

    pub fn fields(&self) -> Vec<String> {
        vec![
            self.seed.to_string(),
            self.trial.to_string(),
            self.scheme.to_string(),
            sig(self.rho_c),
            sig(self.rho_r),
            self.status.to_string(),
            opt(self.throughput_bpshz),
            opt(self.sensing_power_mw),
            opt(self.min_target_power_mw),
            opt(self.crosscorr),
            opt(self.objective),
            opt(self.penalty_residual),
            self.inner_iters_total.to_string(),
            self.outer_iters.to_string(),
            opt(self.wall_time_s),
        ]
    }

    /// Weighted objective for comparisons, `-inf` when the run failed.
    pub fn score(&self) -> f64 {
        match (self.status, self.objective) {
            (SolveStatus::Converged | SolveStatus::MaxIters, Some(v)) => v,
            _ => f64::NEG_INFINITY,
        }
    }
}

/// Solve one scenario drawn from `(seed, stream)`.
pub fn solve_scenario(
    config: &ScenarioConfig,
    seed: u64,
    stream: u64,
    scheme: Scheme,
    options: &RunOptions,
) -> Result<RunReport> {
    let channels =
        generate_channels_substream(config, seed, stream).map_err(|e| HarnessError::Config(e.to_string()))?;
    let scene = Scene::with_channels(config.clone(), channels).map_err(|e| HarnessError::Config(e.to_string()))?;
    options
        .solver
        .validate()
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let start = Instant::now();
    let outcome = noma_isac::solve(&scene, &options.solver, scheme);
    let elapsed = start.elapsed().as_secs_f64();
    let mut report = RunReport::from_outcome(&scene, seed, stream, scheme, &options.solver, &outcome);
    if options.timing {
        report.wall_time_s = Some(elapsed);
    }
    Ok(report)
}

/// Solve the scenario in `config_path` for `seed` and write `report.json`
/// and `beamformers.csv` into `out_dir`.
pub fn run_solve(
    config_path: &Path,
    seed: u64,
    scheme: Scheme,
    out_dir: &Path,
    options: &RunOptions,
) -> Result<RunReport> {
    let config = load_config(config_path)?;
    let report = solve_scenario(&config, seed, 0, scheme, options)?;
    std::fs::create_dir_all(out_dir)?;
    report.write_json(&out_dir.join("report.json"))?;
    report.write_beamformers_csv(&out_dir.join("beamformers.csv"))?;
    Ok(report)
}

fn pool(jobs: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start {jobs:?} workers: {e}")))
}

fn write_rows(path: &Path, rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = csv::Writer::from_writer(std::io::BufWriter::new(std::fs::File::create(path)?));
    out.write_record(TRIAL_HEADER)?;
    for row in rows {
        out.write_record(row)?;
    }
    out.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?.flush()?;
    Ok(())
}

/// Solve every (scheme, weight pair, seed) combination. Rows are sorted by
/// scheme, then by `rho_c / rho_r` from communication-heavy to
/// sensing-heavy, then by seed. Failed runs become rows with their status.
pub fn sweep(config: &ScenarioConfig, spec: &SweepSpec, options: &RunOptions) -> Result<Vec<TrialRecord>> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for &scheme in &spec.schemes {
        for &(rho_c, rho_r) in &spec.weights {
            for &seed in &spec.seeds {
                jobs.push((scheme, rho_c, rho_r, seed));
            }
        }
    }
    jobs.sort_by(|a, b| {
        a.0.cmp(&b.0)
            .then(ratio(b.1, b.2).total_cmp(&ratio(a.1, a.2)))
            .then(b.1.total_cmp(&a.1))
            .then(a.3.cmp(&b.3))
    });
    jobs.dedup();
    let reports: Vec<Result<RunReport>> = pool(options.jobs)?.install(|| {
        jobs.par_iter()
            .map(|&(scheme, rho_c, rho_r, seed)| {
                let mut config = config.clone();
                config.weight_comm = rho_c;
                config.weight_radar = rho_r;
                solve_scenario(&config, seed, 0, scheme, options)
            })
            .collect()
    });
    reports
        .into_iter()
        .map(|r| r.map(|r| TrialRecord::from_report(&r, 0)))
        .collect()
}

fn ratio(rho_c: f64, rho_r: f64) -> f64 {
    if rho_r == 0.0 {
        f64::INFINITY
    } else {
        rho_c / rho_r
    }
}

pub fn run_sweep(
    config_path: &Path,
    spec: &SweepSpec,
    out_csv: &Path,
    options: &RunOptions,
) -> Result<Vec<TrialRecord>> {
    let config = load_config(config_path)?;
    let records = sweep(&config, spec, options)?;
    write_rows(out_csv, records.iter().map(TrialRecord::fields))?;
    Ok(records)
}

/// Mean, median and sample standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub std: f64,
}

pub fn summarize(values: &[f64]) -> Option<Summary> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    let median = if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    };
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    Some(Summary { mean, median, std })
}

/// Per-trial records of a Monte-Carlo campaign. Trial `i` draws its channels
/// from substream `i` of `master_seed`, so results do not depend on the
/// worker count.
pub fn montecarlo(
    config: &ScenarioConfig,
    master_seed: u64,
    n_trials: usize,
    scheme: Scheme,
    options: &RunOptions,
) -> Result<Vec<TrialRecord>> {
    if n_trials == 0 {
        return Err(HarnessError::Config("trials must be at least 1".into()));
    }
    let reports: Vec<Result<RunReport>> = pool(options.jobs)?.install(|| {
        (0..n_trials as u64)
            .into_par_iter()
            .map(|i| solve_scenario(config, master_seed, i, scheme, options))
            .collect()
    });
    reports
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|r| TrialRecord::from_report(&r, i as u64)))
        .collect()
}

/// Summary rows over the converged trials: `status` is `mean`, `median` or
/// `std`, `trial` holds the number of converged trials.
pub fn aggregate_rows(records: &[TrialRecord]) -> Vec<Vec<String>> {
    let Some(first) = records.first() else {
        return Vec::new();
    };
    let converged: Vec<&TrialRecord> = records.iter().filter(|r| r.status == SolveStatus::Converged).collect();
    let pick =
        |f: fn(&TrialRecord) -> Option<f64>| summarize(&converged.iter().filter_map(|r| f(r)).collect::<Vec<_>>());
    let throughput = pick(|r| r.throughput_bpshz);
    let sensing = pick(|r| r.sensing_power_mw);
    type Stat = fn(&Summary) -> f64;
    let stats: [(&str, Stat); 3] = [("mean", |s| s.mean), ("median", |s| s.median), ("std", |s| s.std)];
    stats
        .iter()
        .map(|(name, get)| {
            let mut row = vec![String::new(); TRIAL_HEADER.len()];
            row[0] = first.seed.to_string();
            row[1] = converged.len().to_string();
            row[2] = first.scheme.to_string();
            row[3] = sig(first.rho_c);
            row[4] = sig(first.rho_r);
            row[5] = (*name).to_string();
            row[6] = opt(throughput.as_ref().map(get));
            row[7] = opt(sensing.as_ref().map(get));
            row
        })
        .collect()
}

pub fn run_montecarlo(
    config_path: &Path,
    master_seed: u64,
    n_trials: usize,
    scheme: Scheme,
    out_csv: &Path,
    options: &RunOptions,
) -> Result<Vec<TrialRecord>> {
    let config = load_config(config_path)?;
    let records = montecarlo(&config, master_seed, n_trials, scheme, options)?;
    let rows: Vec<Vec<String>> = records
        .iter()
        .map(TrialRecord::fields)
        .chain(aggregate_rows(&records))
        .collect();
    write_rows(out_csv, rows)?;
    Ok(records)
}

/// `(angle_deg, power_mw)` over [-90, 90] in steps of `grid_step_deg`. The
/// last point is 90 even when the step does not divide 180.
pub fn beampattern_grid(cov: &CMatrix, geometry: &ArrayGeometry, grid_step_deg: f64) -> Result<Vec<(f64, f64)>> {
    if !(grid_step_deg > 0.0 && grid_step_deg <= 180.0) {
        return Err(HarnessError::Config(format!(
            "grid-step must lie in (0, 180], got {grid_step_deg}"
        )));
    }
    let steps = (180.0 / grid_step_deg + 1e-9).floor() as usize;
    let mut angles: Vec<f64> = (0..=steps).map(|i| -90.0 + i as f64 * grid_step_deg).collect();
    if 90.0 - angles[steps] > 1e-9 {
        angles.push(90.0);
    }
    angles
        .into_iter()
        .map(|a| {
            let a = a.min(90.0);
            beampattern_power(cov, a, geometry)
                .map(|p| (a, p))
                .map_err(|e| HarnessError::Config(e.to_string()))
        })
        .collect()
}

/// Write the transmit beampattern of a converged report as
/// `angle_deg, power_mw`.
pub fn export_beampattern(report: &RunReport, grid_step_deg: f64, out_csv: &Path) -> Result<Vec<(f64, f64)>> {
    if report.status != SolveStatus::Converged {
        return Err(HarnessError::Refused(format!(
            "refusing to export the beampattern of a run with status {}",
            report.status
        )));
    }
    let rows = beampattern_grid(&report.transmit_covariance(), &report.scenario.geometry, grid_step_deg)?;
    let mut out = csv::Writer::from_writer(std::io::BufWriter::new(std::fs::File::create(out_csv)?));
    out.write_record(["angle_deg", "power_mw"])?;
    for (a, p) in &rows {
        out.write_record([sig(*a), sig(*p)])?;
    }
    out.into_inner().map_err(|e| HarnessError::Io(e.to_string()))?.flush()?;
    Ok(rows)
}
