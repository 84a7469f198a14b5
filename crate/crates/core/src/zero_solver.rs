//! Closed-form candidate optima for the `d = 0` problem, plus the Lagrange
//! multipliers that seed the homotopy path.
//!
//! With `d = 0` the two constraints are pairs of parallel hyperplanes
//! `n_1 a = +-c1^(-1/2)`, `n_2 a = +-c2^(-1/2)` with row vectors
//! `n_1 = [1, -r, r, -r^2]` and `n_2 = [1, r, -r, -r^2]`. Up to an overall
//! sign there are two essential intersection planes (one per relative sign
//! choice); on each, minimizing the power ellipsoid `a^T M a` reduces to a
//! 2x2 linear solve for the in-plane coordinates, with tangency conditions
//! `v_1^T M a = v_2^T M a = 0` along the plane directions `v_1 = [r^2,0,0,1]`,
//! `v_2 = [0,1,1,0]`.

use thiserror::Error;

use crate::linsolve::lu_solve;
use crate::quadforms::{dot4, mat4_vec, norm4, quad_form, Mat4, Vec4};
use crate::reduction::ReducedProblem;

/// One of the two closed-form `d = 0` candidates.
#[derive(Debug, Clone, PartialEq)]
pub struct ZeroCandidate {
    pub a: Vec4,
    pub power: f64,
    /// The relative sign between the two constraint equalities (+1 or -1).
    pub sign_choice: f64,
    pub lambda: [f64; 2],
    /// Norm of `M a - lambda1 Q1 a - lambda2 Q2 a` after the least-squares fit.
    pub kkt_residual: f64,
}

impl ZeroCandidate {
    /// True when a bootstrapped multiplier is meaningfully negative,
    /// flagging a candidate that is not a KKT point with both constraints
    /// active. Such branches are still integrated, just marked.
    pub fn has_negative_multiplier(&self) -> bool {
        self.lambda.iter().any(|&l| l < -1e-10)
    }
}

#[derive(Debug, Error)]
pub enum ZeroSolveError {
    /// The 2x2 tangency system was singular. Cannot happen for positive
    /// definite `M`; reported rather than asserted so callers can surface it.
    #[error("singular tangency system for sign choice {sign_choice}")]
    SingularTangentSystem { sign_choice: f64 },
}

/// Plane directions spanning the null space of both constraint rows.
pub fn plane_directions(r: f64) -> (Vec4, Vec4) {
    ([r * r, 0.0, 0.0, 1.0], [0.0, 1.0, 1.0, 0.0])
}

/// Computes both `d = 0` candidates (sign choices +1 and -1), each with
/// bootstrapped multipliers. Candidates are canonicalized so that the first
/// non-negligible component is positive.
pub fn solve_zero(red: &ReducedProblem) -> Result<(ZeroCandidate, ZeroCandidate), ZeroSolveError> {
    let m = red.m_mat();
    let plus = solve_one(red, &m, 1.0)?;
    let minus = solve_one(red, &m, -1.0)?;
    Ok((plus, minus))
}

fn solve_one(red: &ReducedProblem, m: &Mat4, sign: f64) -> Result<ZeroCandidate, ZeroSolveError> {
    let r = red.r;
    let inv_sqrt_c1 = 1.0 / red.c1.sqrt();
    let inv_sqrt_c2 = 1.0 / red.c2.sqrt();
    // Base point on the constraint-intersection plane for this sign choice:
    // n_1 b = c1^(-1/2), n_2 b = sign * c2^(-1/2).
    let base: Vec4 = [
        0.5 * (inv_sqrt_c1 + sign * inv_sqrt_c2),
        (sign * inv_sqrt_c2 - inv_sqrt_c1) / (2.0 * r),
        0.0,
        0.0,
    ];
    let (v1, v2) = plane_directions(r);

    let mv1 = mat4_vec(m, &v1);
    let mv2 = mat4_vec(m, &v2);
    let mb = mat4_vec(m, &base);
    let sys = [[dot4(&v1, &mv1), dot4(&v1, &mv2)], [dot4(&v2, &mv1), dot4(&v2, &mv2)]];
    let rhs = [-dot4(&v1, &mb), -dot4(&v2, &mb)];
    let (z, _) = lu_solve(sys, rhs).map_err(|_| ZeroSolveError::SingularTangentSystem { sign_choice: sign })?;

    let mut a = [0.0; 4];
    for k in 0..4 {
        a[k] = base[k] + z[0] * v1[k] + z[1] * v2[k];
    }
    canonicalize_sign(&mut a);

    let power = quad_form(m, &a);
    let (l1, l2, residual) = bootstrap_multipliers(&a, red);
    Ok(ZeroCandidate {
        a,
        power,
        sign_choice: sign,
        lambda: [l1, l2],
        kkt_residual: residual,
    })
}

/// Flips the overall sign so the first non-negligible component is positive.
pub fn canonicalize_sign(a: &mut Vec4) {
    let scale = a.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for &v in a.iter() {
        if v.abs() > 1e-13 * scale {
            if v < 0.0 {
                for x in a.iter_mut() {
                    *x = -*x;
                }
            }
            return;
        }
    }
}

/// Least-squares multipliers for the stationarity condition
/// `M a = lambda1 Q1 a + lambda2 Q2 a` at `w = 0` (4 equations, 2 unknowns).
///
/// Returns `(lambda1, lambda2, residual_norm)`. A negative multiplier is a
/// diagnostic, not an error: it flags a candidate that is not a KKT point
/// with both constraints active.
pub fn bootstrap_multipliers(a: &Vec4, red: &ReducedProblem) -> (f64, f64, f64) {
    assert!(norm4(a) > 0.0, "cannot bootstrap multipliers at a = 0");
    let m = red.m_mat();
    let ma = mat4_vec(&m, a);
    let u = mat4_vec(&red.q_mat(1, 0.0), a);
    let v = mat4_vec(&red.q_mat(2, 0.0), a);
    // Normal equations of the 4x2 least-squares problem.
    let gram = [[dot4(&u, &u), dot4(&u, &v)], [dot4(&v, &u), dot4(&v, &v)]];
    let rhs = [dot4(&u, &ma), dot4(&v, &ma)];
    let (lambda, _) = lu_solve(gram, rhs).unwrap_or(([0.0, 0.0], 0.0));
    let mut defect = [0.0; 4];
    for k in 0..4 {
        defect[k] = ma[k] - lambda[0] * u[k] - lambda[1] * v[k];
    }
    (lambda[0], lambda[1], norm4(&defect))
}
