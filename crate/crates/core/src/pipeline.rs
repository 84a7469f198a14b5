//! Full physical pipeline: reduce, solve, lift, evaluate.

use thiserror::Error;

use crate::homotopy::{solve, SolveError, SolveReport, SolverConfig};
use crate::physical::{relay_power, sinr, CMat, PhysicalProblem};
use crate::reduction::{reduce, ReduceError, ReducedProblem};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Reduce(#[from] ReduceError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

/// Solver output lifted back to physical units.
#[derive(Debug, Clone)]
pub struct PhysicalSolveReport {
    pub reduced: ReducedProblem,
    pub report: SolveReport,
    /// The lifted complex beamforming matrix.
    pub beam: CMat,
    /// Relay transmit power in watts, evaluated on the lifted matrix.
    pub power_watts: f64,
    /// Achieved SINR per terminal (linear scale).
    pub sinr: [f64; 2],
}

/// Reduces a physical instance, runs the homotopy solver, and lifts the
/// result back to a full beamforming matrix with physical diagnostics.
pub fn solve_physical(
    prob: &PhysicalProblem,
    cfg: &SolverConfig,
) -> Result<PhysicalSolveReport, PipelineError> {
    let reduced = reduce(prob)?;
    let report = solve(&reduced, cfg)?;
    let beam = reduced.lift_real(&report.a);
    let power_watts = relay_power(&beam, prob);
    let sinr = [sinr(1, &beam, prob), sinr(2, &beam, prob)];
    Ok(PhysicalSolveReport {
        reduced,
        report,
        beam,
        power_watts,
        sinr,
    })
}
