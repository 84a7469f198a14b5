//! `twrbeam`: minimum-power two-way-relay beamforming from the command line.
//!
//! Subcommands:
//! - `solve`: run the full pipeline on one instance (JSON in, JSON/CSV out)
//! - `batch`: seeded Monte Carlo sweep over SINR targets (CSV stream)
//! - `verify`: check an externally supplied solution against an instance
//! - `reduce`: emit the reduced coefficients (and lift basis) of an instance
//!
//! Exit codes: 0 success, 2 parse/usage error, 3 degenerate channels,
//! 4 infeasible instance or failed verification, 5 internal error.

mod run;
mod schema;

use std::io::Read;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use twrbeam_core::homotopy::SolverConfig;

#[derive(Parser)]
#[command(name = "twrbeam", version, about = "Minimum-power beamforming for two-way relays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Solver tunables; values given here override any in the instance file.
#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    /// RK4 step count per branch
    #[arg(long)]
    pub steps: Option<usize>,
    /// Newton correction tolerance on constraint/stationarity defects
    #[arg(long)]
    pub corr_tol: Option<f64>,
    /// Multiplier sign tolerance before a branch is abandoned
    #[arg(long)]
    pub lambda_tol: Option<f64>,
    /// Maximum Newton iterations per correction
    #[arg(long)]
    pub max_newton: Option<usize>,
}

impl SolverFlags {
    pub fn apply(&self, cfg: &mut SolverConfig) {
        if let Some(v) = self.steps {
            cfg.steps = v;
        }
        if let Some(v) = self.corr_tol {
            cfg.corr_tol = v;
        }
        if let Some(v) = self.lambda_tol {
            cfg.lambda_tol = v;
        }
        if let Some(v) = self.max_newton {
            cfg.max_newton = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve an instance file (reads stdin when no path is given)
    Solve {
        /// Instance path; `-` or omitted reads stdin
        instance: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
        /// Also run the multi-start oracle and report the relative power gap
        #[arg(long)]
        verify: bool,
        /// Oracle start count (with --verify)
        #[arg(long, default_value_t = 32)]
        starts: usize,
        /// Oracle seed (with --verify)
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Seeded Monte Carlo sweep: `count` random channels per SINR target
    Batch {
        /// Base seed for channel generation
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Instances per gamma point
        #[arg(long)]
        count: usize,
        /// SINR target sweep, linear or dB: "1,2,4" or "0dB,3dB,6dB"
        #[arg(long)]
        gammas: String,
        /// Relay antenna count
        #[arg(long, default_value_t = 4)]
        m: usize,
        #[arg(long, default_value_t = 1.0)]
        p1: f64,
        #[arg(long, default_value_t = 1.0)]
        p2: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma_r2: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma1_2: f64,
        #[arg(long, default_value_t = 0.1)]
        sigma2_2: f64,
        /// Verify each row against the oracle (adds the oracle_gap column)
        #[arg(long)]
        verify: bool,
        /// Oracle start count (with --verify)
        #[arg(long, default_value_t = 32)]
        starts: usize,
        #[arg(long, value_enum, default_value_t = Format::Csv)]
        format: Format,
    },
    /// Check an externally supplied solution file against an instance
    Verify {
        /// Instance path
        #[arg(long)]
        instance: PathBuf,
        /// Solution path (kind "solution" or "solution_complex")
        #[arg(long)]
        solution: PathBuf,
        /// Oracle start count for the power-gap check
        #[arg(long, default_value_t = 32)]
        starts: usize,
        /// Oracle seed
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Emit the reduced problem for an instance
    Reduce {
        /// Instance path; `-` or omitted reads stdin
        instance: Option<PathBuf>,
    },
}

fn read_input(path: &Option<PathBuf>) -> Result<String> {
    match path {
        Some(p) if p.as_os_str() != "-" => {
            std::fs::read_to_string(p).with_context(|| format!("cannot read {}", p.display()))
        }
        _ => {
            let mut buf = String::new();
            std::io::stdin()
                .read_to_string(&mut buf)
                .context("cannot read instance from stdin")?;
            Ok(buf)
        }
    }
}

fn dispatch(cli: Cli) -> Result<run::CommandOutcome> {
    match cli.command {
        Command::Solve { instance, solver, verify, starts, seed, format } => {
            let text = read_input(&instance)?;
            run::cmd_solve(&text, &solver, verify, starts, seed, format)
        }
        Command::Batch {
            seed,
            count,
            gammas,
            m,
            p1,
            p2,
            sigma_r2,
            sigma1_2,
            sigma2_2,
            verify,
            starts,
            format,
        } => {
            let params = run::BatchParams {
                seed,
                count,
                gammas: run::parse_gamma_sweep(&gammas)?,
                antennas: m,
                p1,
                p2,
                sigma_r2,
                sigma1_2,
                sigma2_2,
                verify_starts: verify.then_some(starts),
            };
            run::cmd_batch(&params, format)
        }
        Command::Verify { instance, solution, starts, seed } => {
            let instance_text = read_input(&Some(instance))?;
            let solution_text = read_input(&Some(solution))?;
            run::cmd_verify(&instance_text, &solution_text, starts, seed)
        }
        Command::Reduce { instance } => {
            let text = read_input(&instance)?;
            run::cmd_reduce(&text)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(outcome) => {
            print!("{}", outcome.stdout);
            ExitCode::from(outcome.code as u8)
        }
        Err(err) => {
            // Input/parse problems: structured error on stderr, exit 2.
            eprintln!(
                "{}",
                serde_json::json!({ "status": "parse_error", "error": format!("{err:#}") })
            );
            ExitCode::from(run::exit_code::PARSE as u8)
        }
    }
}
