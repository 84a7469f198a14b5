//! Homotopy continuation from the `d = 0` solution to the full problem.
//!
//! The constraints are deformed through `Q_i^(w) = c_i T_ki - w d_i tilde(t_ii)`
//! with `w` running from 0 to 1. Along the path both constraints stay active
//! and the KKT stationarity `M a = lambda1 Q1^(w) a + lambda2 Q2^(w) a` holds,
//! which after differentiating in `w` gives the linear 6x6 system
//!
//! ```text
//! [ lam1 Q1 + lam2 Q2 - M   Q1 a   Q2 a ] [ da/dw  ]   [ sum_i lam_i d_i tilde(t_ii) a ]
//! [ (Q1 a)^T                 0      0   ] [ dl1/dw ] = [ (d1/2) a^T tilde(t_11) a      ]
//! [ (Q2 a)^T                 0      0   ] [ dl2/dw ]   [ (d2/2) a^T tilde(t_22) a      ]
//! ```
//!
//! integrated with classical fixed-step RK4. After every step a Newton
//! correction re-solves the six KKT residual equations at fixed `w`, so
//! integration drift never accumulates. Each of the two `d = 0` candidates
//! seeds one branch; the feasible endpoint of least power wins.

use thiserror::Error;

use crate::linsolve::{lu_solve6_aug, Singular};
use crate::quadforms::{dot4, mat4_vec, norm4, quad_form, tilde_of, Mat4, Vec4};
use crate::reduction::ReducedProblem;
use crate::zero_solver::{solve_zero, ZeroCandidate, ZeroSolveError};

/// Tunables for the path integration.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Number of fixed RK4 steps from `w = 0` to `w = 1`.
    pub steps: usize,
    /// Newton correction target for constraint and stationarity defects.
    pub corr_tol: f64,
    /// A multiplier below `-lambda_tol` after correction fails the branch.
    pub lambda_tol: f64,
    /// Maximum Newton iterations per correction.
    pub max_newton: usize,
    /// Disable to measure the raw RK4 order (no manifold correction).
    pub correction: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            steps: 100,
            corr_tol: 1e-10,
            lambda_tol: 1e-8,
            max_newton: 10,
            correction: true,
        }
    }
}

/// A point on the KKT solution path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomotopyState {
    pub a: Vec4,
    pub lambda: [f64; 2],
    pub w: f64,
}

/// Per-branch integration telemetry.
#[derive(Debug, Clone, PartialEq)]
pub struct PathDiagnostics {
    pub steps_taken: usize,
    /// Smallest `|det|` of the 6x6 path matrix seen across all solves.
    pub min_abs_det: f64,
    /// Largest Newton correction displacement applied after any step.
    pub max_correction: f64,
    /// Largest `|a^T Q_i^(w) a - 1|` at accepted states.
    pub max_constraint_defect: f64,
    pub lambda_sign_violations: usize,
    /// `(w, power)` at every accepted state, starting from `w = 0`.
    pub power_trace: Vec<(f64, f64)>,
}

impl PathDiagnostics {
    fn new() -> Self {
        PathDiagnostics {
            steps_taken: 0,
            min_abs_det: f64::INFINITY,
            max_correction: 0.0,
            max_constraint_defect: 0.0,
            lambda_sign_violations: 0,
            power_trace: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BranchError {
    #[error("singular 6x6 path system at w = {w:.6}: {source}")]
    SingularSystem { w: f64, source: Singular },
    #[error("Newton correction diverged at w = {w:.6} (residual {residual:.3e})")]
    CorrectionDiverged { w: f64, residual: f64 },
    #[error("multiplier left the active regime at w = {w:.6}: lambda = [{l1:.3e}, {l2:.3e}]")]
    NegativeMultiplier { w: f64, l1: f64, l2: f64 },
}

/// Outcome of integrating one branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchReport {
    pub sign_choice: f64,
    pub start_power: f64,
    pub started_with_negative_multiplier: bool,
    pub endpoint: Result<HomotopyState, BranchError>,
    pub diagnostics: PathDiagnostics,
}

/// Final solver output for a reduced instance.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub a: Vec4,
    pub lambda: [f64; 2],
    /// Reduced-units power `a^T M a`; multiply by `red.scale` for watts.
    pub power: f64,
    /// `f_i(a)` at `w = 1`.
    pub constraints: [f64; 2],
    /// `||M a - sum lambda_i Q_i a|| / ||M a||` at the endpoint.
    pub kkt_residual: f64,
    /// Sign choice of the winning branch (+1 or -1).
    pub branch: f64,
    pub branches: Vec<BranchReport>,
    /// False when `c_i (1 + r^2) - d_i <= 0` for some `i`, a necessary
    /// feasibility condition violated; the instance is then unsatisfiable.
    pub precheck_ok: bool,
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error(transparent)]
    Zero(#[from] ZeroSolveError),
    #[error("no feasible branch reached w = 1 (feasibility pre-check {})",
            if *.precheck_ok { "passed" } else { "FAILED: instance provably infeasible" })]
    NoFeasibleBranch {
        branches: Vec<BranchReport>,
        precheck_ok: bool,
    },
}

/// Derivative of `(a, lambda1, lambda2)` with respect to `w`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeDerivative {
    pub da: Vec4,
    pub dlambda: [f64; 2],
    /// `|det|` of the 6x6 system, for conditioning diagnostics.
    pub abs_det: f64,
}

/// Precomputed constant matrices for one instance.
struct PathContext {
    m: Mat4,
    tilde11: Mat4,
    tilde22: Mat4,
    d: [f64; 2],
    q1_parts: (Mat4, Mat4), // (c_i T_ki, tilde(t_ii)) for i = 1
    q2_parts: (Mat4, Mat4),
}

impl PathContext {
    fn new(red: &ReducedProblem) -> Self {
        let (t1, t2) = red.tau();
        let tilde11 = tilde_of(&t1.outer());
        let tilde22 = tilde_of(&t2.outer());
        PathContext {
            m: red.m_mat(),
            tilde11,
            tilde22,
            d: [red.d1, red.d2],
            q1_parts: (red.q_mat(1, 0.0), tilde11),
            q2_parts: (red.q_mat(2, 0.0), tilde22),
        }
    }

    fn q(&self, i: usize, w: f64) -> Mat4 {
        let (base, tilde) = if i == 1 { &self.q1_parts } else { &self.q2_parts };
        let wd = w * self.d[i - 1];
        let mut out = *base;
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] -= wd * tilde[r][c];
            }
        }
        out
    }

    /// Deformed constraint matrices frozen at one `w`.
    fn qw(&self, w: f64) -> QwCache {
        QwCache { q1: self.q(1, w), q2: self.q(2, w) }
    }

    /// Assembles and solves the 6x6 path system at `y` with constraint
    /// matrices frozen in `qw`.
    fn rhs_at(&self, y: &[f64; 6], qw: &QwCache) -> Result<([f64; 6], f64), Singular> {
        rhs_at_impl(self, y, qw)
    }
}

/// `Q_1^(w)`, `Q_2^(w)` frozen at one homotopy parameter value.
struct QwCache {
    q1: Mat4,
    q2: Mat4,
}

/// `m v` by columns for a symmetric `m` (broadcast-and-accumulate form,
/// which vectorizes much better than per-row dot products). All matrices on
/// the path (`M`, `Q_i^(w)`, `tilde(t_ii)`) are symmetric.
#[inline(always)]
fn sym4_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut acc = [0.0; 4];
    for c in 0..4 {
        let vc = v[c];
        for k in 0..4 {
            acc[k] += vc * m[c][k];
        }
    }
    acc
}

#[inline(always)]
fn rhs_at_impl(ctx: &PathContext, y: &[f64; 6], qw: &QwCache) -> Result<([f64; 6], f64), Singular> {
    let a = [y[0], y[1], y[2], y[3]];
    let (l1, l2) = (y[4], y[5]);
    let q1a = sym4_vec(&qw.q1, &a);
    let q2a = sym4_vec(&qw.q2, &a);
    let t11a = sym4_vec(&ctx.tilde11, &a);
    let t22a = sym4_vec(&ctx.tilde22, &a);

    let mut rows = [[0.0f64; 8]; 6];
    for r in 0..4 {
        let q1r = &qw.q1[r];
        let q2r = &qw.q2[r];
        let mr = &ctx.m[r];
        for c in 0..4 {
            rows[r][c] = l1 * q1r[c] + l2 * q2r[c] - mr[c];
        }
        rows[r][4] = q1a[r];
        rows[r][5] = q2a[r];
        rows[4][r] = q1a[r];
        rows[5][r] = q2a[r];
        rows[r][6] = l1 * ctx.d[0] * t11a[r] + l2 * ctx.d[1] * t22a[r];
    }
    rows[4][6] = 0.5 * ctx.d[0] * dot4(&a, &t11a);
    rows[5][6] = 0.5 * ctx.d[1] * dot4(&a, &t22a);

    let (x, det) = lu_solve6_aug(rows)?;
    Ok((x, det.abs()))
}

/// Right-hand side of the six-equation path ODE at a state.
pub fn ode_rhs(s: &HomotopyState, red: &ReducedProblem) -> Result<OdeDerivative, BranchError> {
    let ctx = PathContext::new(red);
    let y = pack(s);
    let (dy, abs_det) = ctx
        .rhs_at(&y, &ctx.qw(s.w))
        .map_err(|source| BranchError::SingularSystem { w: s.w, source })?;
    Ok(OdeDerivative {
        da: [dy[0], dy[1], dy[2], dy[3]],
        dlambda: [dy[4], dy[5]],
        abs_det,
    })
}

fn pack(s: &HomotopyState) -> [f64; 6] {
    [s.a[0], s.a[1], s.a[2], s.a[3], s.lambda[0], s.lambda[1]]
}

fn unpack(y: &[f64; 6], w: f64) -> HomotopyState {
    HomotopyState {
        a: [y[0], y[1], y[2], y[3]],
        lambda: [y[4], y[5]],
        w,
    }
}

/// KKT residual components at fixed `w`: stationarity defect vector and the
/// two constraint defects.
#[inline(always)]
fn residuals(ctx: &PathContext, qw: &QwCache, y: &[f64; 6]) -> ([f64; 4], [f64; 2], f64) {
    let a = [y[0], y[1], y[2], y[3]];
    let ma = sym4_vec(&ctx.m, &a);
    let q1a = sym4_vec(&qw.q1, &a);
    let q2a = sym4_vec(&qw.q2, &a);
    let mut stat = [0.0; 4];
    for k in 0..4 {
        stat[k] = ma[k] - y[4] * q1a[k] - y[5] * q2a[k];
    }
    let con = [dot4(&a, &q1a) - 1.0, dot4(&a, &q2a) - 1.0];
    (stat, con, norm4(&ma))
}

/// Newton iteration on the six KKT residual equations at fixed `w`.
///
/// Converges when both constraint defects are below `corr_tol` and the
/// stationarity defect is below `corr_tol * ||M a||`. Returns the corrected
/// state and the total displacement applied.
pub fn newton_correct(
    s: &HomotopyState,
    red: &ReducedProblem,
    cfg: &SolverConfig,
) -> Result<(HomotopyState, f64), BranchError> {
    let ctx = PathContext::new(red);
    let mut y = pack(s);
    let (moved, _) = newton_correct_inner(&ctx, &ctx.qw(s.w), &mut y, s.w, cfg)?;
    Ok((unpack(&y, s.w), moved))
}

/// Returns `(total displacement, final constraint defect)`.
fn newton_correct_inner(
    ctx: &PathContext,
    qw: &QwCache,
    y: &mut [f64; 6],
    w: f64,
    cfg: &SolverConfig,
) -> Result<(f64, f64), BranchError> {
    let mut total_move = 0.0;
    for iter in 0..=cfg.max_newton {
        let (stat, con, ma_norm) = residuals(ctx, qw, y);
        let stat_norm = norm4(&stat);
        let con_defect = con[0].abs().max(con[1].abs());
        if con_defect <= cfg.corr_tol && stat_norm <= cfg.corr_tol * ma_norm.max(f64::MIN_POSITIVE) {
            return Ok((total_move, con_defect));
        }
        if iter == cfg.max_newton {
            break;
        }

        let a = [y[0], y[1], y[2], y[3]];
        let q1a = sym4_vec(&qw.q1, &a);
        let q2a = sym4_vec(&qw.q2, &a);
        let mut jac = [[0.0f64; 8]; 6];
        for r in 0..4 {
            let q1r = &qw.q1[r];
            let q2r = &qw.q2[r];
            for c in 0..4 {
                jac[r][c] = ctx.m[r][c] - y[4] * q1r[c] - y[5] * q2r[c];
            }
            jac[r][4] = -q1a[r];
            jac[r][5] = -q2a[r];
            jac[4][r] = 2.0 * q1a[r];
            jac[5][r] = 2.0 * q2a[r];
            jac[r][6] = -stat[r];
        }
        jac[4][6] = -con[0];
        jac[5][6] = -con[1];
        let (delta, _) = lu_solve6_aug(jac).map_err(|_| BranchError::CorrectionDiverged {
            w,
            residual: stat_norm.max(con_defect),
        })?;
        let step_norm: f64 = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !step_norm.is_finite() {
            return Err(BranchError::CorrectionDiverged { w, residual: f64::INFINITY });
        }
        for k in 0..6 {
            y[k] += delta[k];
        }
        total_move += step_norm;
    }
    let (stat, con, _) = residuals(ctx, qw, y);
    Err(BranchError::CorrectionDiverged {
        w,
        residual: norm4(&stat).max(con[0].abs()).max(con[1].abs()),
    })
}

/// One RK4 step; subdivides (up to 4 halvings) when the path matrix is
/// singular at an evaluation point, then gives up on the branch.
fn rk4_step(
    ctx: &PathContext,
    y: &[f64; 6],
    w: f64,
    h: f64,
    depth: usize,
    diag: &mut PathDiagnostics,
) -> Result<[f64; 6], BranchError> {
    let attempt = (|| -> Result<[f64; 6], Singular> {
        let qw0 = ctx.qw(w);
        let qw_mid = ctx.qw(w + 0.5 * h);
        let qw1 = ctx.qw(w + h);
        let mut eval = |y: &[f64; 6], qw: &QwCache| -> Result<[f64; 6], Singular> {
            let (dy, det) = ctx.rhs_at(y, qw)?;
            diag.min_abs_det = diag.min_abs_det.min(det);
            Ok(dy)
        };
        let k1 = eval(y, &qw0)?;
        let k2 = eval(&advance(y, &k1, 0.5 * h), &qw_mid)?;
        let k3 = eval(&advance(y, &k2, 0.5 * h), &qw_mid)?;
        let k4 = eval(&advance(y, &k3, h), &qw1)?;
        let mut out = *y;
        for i in 0..6 {
            out[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        Ok(out)
    })();
    match attempt {
        Ok(out) => Ok(out),
        Err(_) if depth < 4 => {
            let half = rk4_step(ctx, y, w, 0.5 * h, depth + 1, diag)?;
            rk4_step(ctx, &half, w + 0.5 * h, 0.5 * h, depth + 1, diag)
        }
        Err(source) => Err(BranchError::SingularSystem { w, source }),
    }
}

fn advance(y: &[f64; 6], k: &[f64; 6], h: f64) -> [f64; 6] {
    let mut out = *y;
    for i in 0..6 {
        out[i] += h * k[i];
    }
    out
}

/// Integrates one branch from its `d = 0` candidate to `w = 1`.
pub fn integrate_branch(
    start: &ZeroCandidate,
    red: &ReducedProblem,
    cfg: &SolverConfig,
) -> BranchReport {
    let ctx = PathContext::new(red);
    let mut diag = PathDiagnostics::new();
    let mut y = [
        start.a[0],
        start.a[1],
        start.a[2],
        start.a[3],
        start.lambda[0],
        start.lambda[1],
    ];
    diag.power_trace.push((0.0, start.power));

    let endpoint = (|| -> Result<HomotopyState, BranchError> {
        let steps = cfg.steps.max(1);
        for step in 0..steps {
            let w0 = step as f64 / steps as f64;
            let w1 = (step + 1) as f64 / steps as f64;
            let h = w1 - w0;
            y = rk4_step(&ctx, &y, w0, h, 0, &mut diag)?;
            let qw1 = ctx.qw(w1);
            let defect = if cfg.correction {
                let (moved, defect) = newton_correct_inner(&ctx, &qw1, &mut y, w1, cfg)?;
                diag.max_correction = diag.max_correction.max(moved);
                defect
            } else {
                let a = [y[0], y[1], y[2], y[3]];
                let q1a = sym4_vec(&qw1.q1, &a);
                let q2a = sym4_vec(&qw1.q2, &a);
                (dot4(&a, &q1a) - 1.0).abs().max((dot4(&a, &q2a) - 1.0).abs())
            };
            diag.steps_taken += 1;
            if y[4] < -cfg.lambda_tol || y[5] < -cfg.lambda_tol {
                diag.lambda_sign_violations += 1;
                return Err(BranchError::NegativeMultiplier { w: w1, l1: y[4], l2: y[5] });
            }
            let a = [y[0], y[1], y[2], y[3]];
            diag.max_constraint_defect = diag.max_constraint_defect.max(defect);
            diag.power_trace.push((w1, quad_form(&ctx.m, &a)));
        }
        Ok(unpack(&y, 1.0))
    })();

    BranchReport {
        sign_choice: start.sign_choice,
        start_power: start.power,
        started_with_negative_multiplier: start.has_negative_multiplier(),
        endpoint,
        diagnostics: diag,
    }
}

/// Necessary feasibility condition `c_i ||t_k||^2 - d_i > 0` for each
/// constraint (Cauchy-Schwarz bound on `f_i`). When it fails the constraint
/// `f_i >= 1` is unsatisfiable.
pub fn feasibility_precheck(red: &ReducedProblem) -> bool {
    let tk_sq = 1.0 + red.r * red.r;
    red.c1 * tk_sq - red.d1 > 0.0 && red.c2 * tk_sq - red.d2 > 0.0
}

/// Full solve: both `d = 0` candidates, both path integrations, best feasible
/// endpoint. The report keeps both branch outcomes and their diagnostics.
pub fn solve(red: &ReducedProblem, cfg: &SolverConfig) -> Result<SolveReport, SolveError> {
    let precheck_ok = feasibility_precheck(red);
    let (plus, minus) = solve_zero(red)?;
    let branches = vec![
        integrate_branch(&plus, red, cfg),
        integrate_branch(&minus, red, cfg),
    ];

    let mut best: Option<(usize, HomotopyState, f64)> = None;
    let m = red.m_mat();
    for (idx, branch) in branches.iter().enumerate() {
        if let Ok(state) = &branch.endpoint {
            let power = quad_form(&m, &state.a);
            if best.as_ref().is_none_or(|(_, _, p)| power < *p) {
                best = Some((idx, *state, power));
            }
        }
    }

    let Some((idx, state, power)) = best else {
        return Err(SolveError::NoFeasibleBranch { branches, precheck_ok });
    };

    let constraints = [red.f_direct(1, &state.a, 1.0), red.f_direct(2, &state.a, 1.0)];
    let ma = mat4_vec(&m, &state.a);
    let q1a = mat4_vec(&red.q_mat(1, 1.0), &state.a);
    let q2a = mat4_vec(&red.q_mat(2, 1.0), &state.a);
    let mut defect = [0.0; 4];
    for k in 0..4 {
        defect[k] = ma[k] - state.lambda[0] * q1a[k] - state.lambda[1] * q2a[k];
    }
    let kkt_residual = norm4(&defect) / norm4(&ma).max(f64::MIN_POSITIVE);

    Ok(SolveReport {
        a: state.a,
        lambda: state.lambda,
        power,
        constraints,
        kkt_residual,
        branch: branches[idx].sign_choice,
        branches,
        precheck_ok,
    })
}
