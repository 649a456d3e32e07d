use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use noma_isac::{Scheme, SolverConfig};
use noma_isac_cli::{
    export_beampattern, run_montecarlo, run_solve, run_sweep, status_exit_code, HarnessError, RunOptions, RunReport,
    SweepSpec, DEFAULT_TRIALS, DEFAULT_WEIGHTS,
};

#[derive(Parser)]
#[command(name = "noma-isac", version, about = "NOMA-ISAC transmit beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Design beamformers for one channel draw.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value = "noma", value_parser = parse_scheme)]
        scheme: Scheme,
        /// Output directory for report.json and beamformers.csv.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Sweep the communication/sensing weights over several seeds.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// First seed; seeds run from here for --trials values.
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        /// Explicit seed list, overrides --seed/--trials.
        #[arg(long, value_delimiter = ',')]
        seeds: Vec<u64>,
        /// Comma-separated schemes.
        #[arg(long, default_value = "noma", value_delimiter = ',', value_parser = parse_scheme)]
        scheme: Vec<Scheme>,
        /// Comma-separated `rho_c:rho_r` pairs.
        #[arg(long, value_delimiter = ',', value_parser = parse_weight)]
        weights: Vec<(f64, f64)>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Independent channel draws from one master seed, with summary rows.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value = "noma", value_parser = parse_scheme)]
        scheme: Scheme,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Export the transmit beampattern of a converged report.
    Beampattern {
        /// report.json written by `solve`.
        #[arg(long)]
        report: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        grid_step: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    eta0: Option<f64>,
    #[arg(long)]
    eta_shrink: Option<f64>,
    #[arg(long)]
    inner_tol: Option<f64>,
    #[arg(long)]
    penalty_tol: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
    /// Record wall-clock time per run.
    #[arg(long)]
    timing: bool,
}

impl RunArgs {
    fn options(&self) -> RunOptions {
        let d = SolverConfig::default();
        RunOptions {
            solver: SolverConfig {
                eta0: self.eta0.unwrap_or(d.eta0),
                eta_shrink: self.eta_shrink.unwrap_or(d.eta_shrink),
                inner_tol: self.inner_tol.unwrap_or(d.inner_tol),
                penalty_tol: self.penalty_tol.unwrap_or(d.penalty_tol),
                ..d
            },
            jobs: self.jobs,
            timing: self.timing,
        }
    }
}

fn parse_scheme(s: &str) -> Result<Scheme, String> {
    s.parse().map_err(|e: noma_isac::Error| e.to_string())
}

fn parse_weight(s: &str) -> Result<(f64, f64), String> {
    let (c, r) = s
        .split_once(':')
        .ok_or_else(|| format!("expected rho_c:rho_r, got '{s}'"))?;
    let c = c.trim().parse::<f64>().map_err(|e| format!("rho_c in '{s}': {e}"))?;
    let r = r.trim().parse::<f64>().map_err(|e| format!("rho_r in '{s}': {e}"))?;
    Ok((c, r))
}

fn run(cli: Cli) -> Result<i32, HarnessError> {
    match cli.command {
        Command::Solve {
            config,
            seed,
            scheme,
            out,
            run,
        } => {
            let report = run_solve(&config, seed, scheme, &out, &run.options())?;
            if let Some(msg) = &report.message {
                eprintln!("{}: {msg}", report.status);
            }
            Ok(status_exit_code(report.status))
        }
        Command::Sweep {
            config,
            seed,
            trials,
            seeds,
            scheme,
            weights,
            out,
            run,
        } => {
            let spec = SweepSpec {
                weights: if weights.is_empty() {
                    DEFAULT_WEIGHTS.to_vec()
                } else {
                    weights
                },
                seeds: if seeds.is_empty() {
                    (seed..seed + trials).collect()
                } else {
                    seeds
                },
                schemes: scheme,
            };
            run_sweep(&config, &spec, &out, &run.options())?;
            Ok(0)
        }
        Command::Montecarlo {
            config,
            seed,
            trials,
            scheme,
            out,
            run,
        } => {
            run_montecarlo(&config, seed, trials, scheme, &out, &run.options())?;
            Ok(0)
        }
        Command::Beampattern { report, grid_step, out } => {
            export_beampattern(&RunReport::read(&report)?, grid_step, &out)?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
