//! Minimum-transmit-power beamforming for a two-way relay with two SINR
//! constraints.
//!
//! The relay applies an `M x M` complex beamforming matrix to the superposed
//! uplink signals; the task is to minimize relay transmit power subject to a
//! target SINR at each terminal. The solver works in three stages:
//!
//! 1. [`reduction`] maps the physical instance onto an equivalent problem over
//!    real 2x2 matrices with seven real coefficients `(q1, q2, c1, c2, d1, d2, r)`.
//! 2. [`zero_solver`] computes the two closed-form candidate optima of the
//!    `d = 0` problem, where both constraints are hyperplanes.
//! 3. [`homotopy`] continuously deforms `d` from zero to its target value,
//!    integrating the KKT system as a six-dimensional ODE with Runge-Kutta
//!    steps and Newton correction back onto the constraint manifold.
//!
//! [`oracle`] provides an independent multi-start penalty optimizer used to
//! cross-check solver output, and [`realify`] converts complex feasible
//! points into real ones of equal power.

pub mod homotopy;
pub mod linsolve;
pub mod oracle;
pub mod physical;
pub mod pipeline;
pub mod quadforms;
pub mod realify;
pub mod reduction;
pub mod zero_solver;

pub use homotopy::{HomotopyState, PathDiagnostics, SolveError, SolveReport, SolverConfig};
pub use oracle::{CheckSummary, CheckTolerances, OracleError, OracleResult};
pub use physical::{ChannelEnsemble, CMat, PhysicalProblem};
pub use pipeline::{solve_physical, PhysicalSolveReport, PipelineError};
pub use quadforms::{Mat2, Mat4, Tau, Vec4};
pub use realify::{ComplexCandidate, RealifyError};
pub use reduction::{reduce, ReduceError, ReducedProblem};
pub use zero_solver::{solve_zero, ZeroCandidate, ZeroSolveError};
