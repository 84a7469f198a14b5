//! Conversion of complex feasible points into real ones of equal power.
//!
//! A complex reduced solution `a = x + j y` enters the objective and the
//! constraints only through `x^T P x + y^T P y` for `P` in `{M, Q1, Q2}`.
//! When both constraints hold with equality, a real combination
//! `v = gx x + gy y` meeting both with equality always exists, and if the
//! input satisfies the stationarity condition the combination has the same
//! power. The search runs in the `(gx, gy)` plane over the restricted 2x2
//! forms `A_i = [[x^T Q_i x, x^T Q_i y], [x^T Q_i y, y^T Q_i y]]`.
//!
//! The two conics `g^T A_i g = 1` always meet: `tr(A_1) = tr(A_2) = 1`, so
//! the difference `D = A_1 - A_2` is traceless and its two null directions
//! are orthogonal; evaluating `A_1` on that orthogonal pair sums to
//! `tr(A_1) = 1`, so at least one null direction `u` has `u^T A_1 u >= 1/2`,
//! and `g = u / sqrt(u^T A_1 u)` satisfies both equalities at once. This
//! replaces case-by-case conic tracing with a two-root quadratic solve.

use thiserror::Error;

use crate::quadforms::{mat4_vec, quad_form, Mat4, Vec4};
use crate::reduction::ReducedProblem;

/// A complex 2x2 candidate split into real and imaginary vectorized parts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComplexCandidate {
    pub x: Vec4,
    pub y: Vec4,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RealifyError {
    #[error("candidate is not on constraint surface {constraint}: value {value:.6e} (expected 1)")]
    NotOnConstraintSurface { constraint: usize, value: f64 },
    #[error("conic intersection failed numerically (residual {residual:.3e})")]
    NoIntersectionFound { residual: f64 },
}

/// Phase rotation `x' = cos(t) x - sin(t) y`, `y' = sin(t) x + cos(t) y`.
///
/// All combined quadratic forms `x^T P x + y^T P y` are invariant.
pub fn rotate(cand: &ComplexCandidate, theta: f64) -> ComplexCandidate {
    let (s, c) = theta.sin_cos();
    let mut x = [0.0; 4];
    let mut y = [0.0; 4];
    for k in 0..4 {
        x[k] = c * cand.x[k] - s * cand.y[k];
        y[k] = s * cand.x[k] + c * cand.y[k];
    }
    ComplexCandidate { x, y }
}

/// Restricted 2x2 form of `q` on the span of `(x, y)`.
fn restricted_form(q: &Mat4, x: &Vec4, y: &Vec4) -> [[f64; 2]; 2] {
    let qx = mat4_vec(q, x);
    let qy = mat4_vec(q, y);
    let xx = crate::quadforms::dot4(x, &qx);
    let xy = crate::quadforms::dot4(x, &qy);
    let yy = crate::quadforms::dot4(y, &qy);
    [[xx, xy], [xy, yy]]
}

fn eval2(a: &[[f64; 2]; 2], g: &[f64; 2]) -> f64 {
    a[0][0] * g[0] * g[0] + 2.0 * a[0][1] * g[0] * g[1] + a[1][1] * g[1] * g[1]
}

/// Finds `g` with `g^T A_1 g = g^T A_2 g = 1` for unit-trace 2x2 symmetric
/// forms. See the module docs for why a solution exists; candidate
/// directions are the null directions of `A_1 - A_2` plus the eigen
/// directions of each form (which cover the degenerate cases where the
/// forms nearly coincide or the input pair is nearly rank one), each
/// followed by a short Newton polish. The candidate with the smallest final
/// residual wins.
fn intersect_unit_conics(a1: &[[f64; 2]; 2], a2: &[[f64; 2]; 2]) -> Result<[f64; 2], RealifyError> {
    let d = [
        [a1[0][0] - a2[0][0], a1[0][1] - a2[0][1]],
        [a1[0][1] - a2[0][1], a1[1][1] - a2[1][1]],
    ];

    let mut dirs: Vec<[f64; 2]> = Vec::with_capacity(6);
    for a in [a1, a2] {
        let theta = 0.5 * (2.0 * a[0][1]).atan2(a[0][0] - a[1][1]);
        let (s, c) = theta.sin_cos();
        dirs.push([c, s]);
        dirs.push([-s, c]);
    }
    // Null directions of D: d00 u^2 + 2 d01 uv + d11 v^2 = 0. D is (near)
    // traceless, so both roots are real; they are exact intersections up to
    // the precondition slop.
    let (p, q, m) = (d[0][0], d[0][1], d[1][1]);
    if p.abs().max(q.abs()).max(m.abs()) > 0.0 {
        let sgn = |v: f64| if v >= 0.0 { 1.0 } else { -1.0 };
        if m.abs() >= p.abs() && m.abs() > 0.0 {
            // Roots of m t^2 + 2 q t + p = 0 in t = v/u.
            let disc = (q * q - m * p).max(0.0).sqrt();
            let t1 = (-q - sgn(q) * disc) / m;
            let t2 = if t1.abs() > 1e-300 { (p / m) / t1 } else { -2.0 * q / m };
            for t in [t1, t2] {
                let n = t.hypot(1.0);
                dirs.push([1.0 / n, t / n]);
            }
        } else if p.abs() > 0.0 {
            // Roots of p s^2 + 2 q s + m = 0 in s = u/v.
            let disc = (q * q - p * m).max(0.0).sqrt();
            let s1 = (-q - sgn(q) * disc) / p;
            let s2 = if s1.abs() > 1e-300 { (m / p) / s1 } else { -2.0 * q / p };
            for s in [s1, s2] {
                let n = s.hypot(1.0);
                dirs.push([s / n, 1.0 / n]);
            }
        }
    }

    let residual_of = |g: &[f64; 2]| (eval2(a1, g) - 1.0).abs().max((eval2(a2, g) - 1.0).abs());
    // Evaluating the forms at g cancels terms of size ~ |g|^2 * |A|; add that
    // rounding floor to each candidate's score so an ill-scaled direction
    // cannot beat a well-scaled one on evaluation noise alone.
    let form_scale = [a1, a2]
        .iter()
        .flat_map(|a| [a[0][0].abs(), a[0][1].abs(), a[1][1].abs()])
        .fold(1.0f64, f64::max);
    let noise_of = |g: &[f64; 2]| 1e-14 * (g[0] * g[0] + g[1] * g[1]) * form_scale;

    let mut best: Option<([f64; 2], f64)> = None;
    for u in dirs {
        let v1 = eval2(a1, &u);
        let v2 = eval2(a2, &u);
        let denom = 0.5 * (v1 + v2);
        let denom = if denom > 1e-12 {
            denom
        } else if v1 > 1e-12 {
            v1
        } else if v2 > 1e-12 {
            v2
        } else {
            continue;
        };
        let mut g = [u[0] / denom.sqrt(), u[1] / denom.sqrt()];
        // Newton polish on the 2x2 residual system; keep the best iterate.
        let mut best_g = g;
        let mut best_score = residual_of(&g) + noise_of(&g);
        for _ in 0..6 {
            if best_score <= 1e-14 {
                break;
            }
            let r1 = eval2(a1, &g) - 1.0;
            let r2 = eval2(a2, &g) - 1.0;
            let jac = [
                [
                    2.0 * (a1[0][0] * g[0] + a1[0][1] * g[1]),
                    2.0 * (a1[0][1] * g[0] + a1[1][1] * g[1]),
                ],
                [
                    2.0 * (a2[0][0] * g[0] + a2[0][1] * g[1]),
                    2.0 * (a2[0][1] * g[0] + a2[1][1] * g[1]),
                ],
            ];
            let Ok((step, _)) = crate::linsolve::lu_solve(jac, [-r1, -r2]) else { break };
            g[0] += step[0];
            g[1] += step[1];
            let score = residual_of(&g) + noise_of(&g);
            if score < best_score {
                best_score = score;
                best_g = g;
            } else {
                break;
            }
        }
        if best.as_ref().is_none_or(|(_, r)| best_score < *r) {
            best = Some((best_g, best_score));
        }
    }

    match best {
        Some((g, score)) if score <= 1e-8 => Ok(g),
        Some((_, score)) => Err(RealifyError::NoIntersectionFound { residual: score }),
        None => Err(RealifyError::NoIntersectionFound { residual: f64::INFINITY }),
    }
}

/// Produces a real point meeting both `w = 1` constraints with equality from
/// a complex candidate that does so in the combined sense.
///
/// When the candidate additionally satisfies the stationarity condition
/// `M z = lambda1 Q1 z + lambda2 Q2 z` (for `z` in `{x, y}`), the output has
/// the same power as the input.
pub fn realify(cand: &ComplexCandidate, red: &ReducedProblem) -> Result<Vec4, RealifyError> {
    let q1 = red.q_mat(1, 1.0);
    let q2 = red.q_mat(2, 1.0);
    for (i, q) in [(1usize, &q1), (2, &q2)] {
        let value = quad_form(q, &cand.x) + quad_form(q, &cand.y);
        if (value - 1.0).abs() > 1e-8 {
            return Err(RealifyError::NotOnConstraintSurface { constraint: i, value });
        }
    }

    let norm_x = crate::quadforms::norm4(&cand.x);
    let norm_y = crate::quadforms::norm4(&cand.y);
    if norm_y <= 1e-14 * norm_x.max(1.0) {
        return Ok(cand.x);
    }
    if norm_x <= 1e-14 * norm_y {
        return Ok(cand.y);
    }

    let a1 = restricted_form(&q1, &cand.x, &cand.y);
    let a2 = restricted_form(&q2, &cand.x, &cand.y);
    let g = intersect_unit_conics(&a1, &a2)?;
    let mut v = [0.0; 4];
    for k in 0..4 {
        v[k] = g[0] * cand.x[k] + g[1] * cand.y[k];
    }
    Ok(v)
}

/// Single-active variant: constraint `active_i` holds with equality, the
/// other with inequality. Returns a real point preserving that pattern.
///
/// After an optional phase rotation bringing `x^T Q_act x` into `(0, 1)`,
/// one of the two component scalings `x / sqrt(x^T Q_act x)` or
/// `y / sqrt(y^T Q_act y)` keeps the inactive constraint satisfied; which one
/// follows from `(a_k - a_i) + (b_k - b_i) >= 0`.
pub fn realify_single_active(
    cand: &ComplexCandidate,
    red: &ReducedProblem,
    active_i: usize,
) -> Result<Vec4, RealifyError> {
    assert!(active_i == 1 || active_i == 2, "constraint index must be 1 or 2");
    let inactive_i = 3 - active_i;
    let q_act = red.q_mat(active_i, 1.0);
    let q_in = red.q_mat(inactive_i, 1.0);

    let act_sum = quad_form(&q_act, &cand.x) + quad_form(&q_act, &cand.y);
    if (act_sum - 1.0).abs() > 1e-8 {
        return Err(RealifyError::NotOnConstraintSurface {
            constraint: active_i,
            value: act_sum,
        });
    }
    let in_sum = quad_form(&q_in, &cand.x) + quad_form(&q_in, &cand.y);
    if in_sum < 1.0 - 1e-8 {
        return Err(RealifyError::NotOnConstraintSurface {
            constraint: inactive_i,
            value: in_sum,
        });
    }

    let norm_x = crate::quadforms::norm4(&cand.x);
    let norm_y = crate::quadforms::norm4(&cand.y);
    if norm_y <= 1e-14 * norm_x.max(1.0) {
        return Ok(cand.x);
    }
    if norm_x <= 1e-14 * norm_y {
        return Ok(cand.y);
    }

    // Rotate until the active x-form lands inside (0, 1); g(0) = alpha,
    // g(pi/2) = 1 - alpha, so a value of 1/2 is always crossed.
    let mut work = *cand;
    let alpha = quad_form(&q_act, &work.x);
    if !(alpha > 1e-10 && alpha < 1.0 - 1e-10) {
        let g = |theta: f64| quad_form(&q_act, &rotate(cand, theta).x);
        let (mut lo, mut hi) = (0.0f64, std::f64::consts::FRAC_PI_2);
        let rising = g(lo) < g(hi);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let v = g(mid);
            if (v - 0.5).abs() < 1e-12 {
                lo = mid;
                hi = mid;
                break;
            }
            if (v < 0.5) == rising {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        work = rotate(cand, 0.5 * (lo + hi));
    }

    let ax = quad_form(&q_act, &work.x);
    let ay = quad_form(&q_act, &work.y);
    let ix = quad_form(&q_in, &work.x);
    let iy = quad_form(&q_in, &work.y);

    // Ratio of inactive to active form per component; scaling a component onto
    // the active surface keeps the inactive constraint iff its ratio is >= 1.
    let ratio_x = if ax > 1e-12 { ix / ax } else { f64::NEG_INFINITY };
    let ratio_y = if ay > 1e-12 { iy / ay } else { f64::NEG_INFINITY };
    let pick_x = match (ratio_x >= 1.0 - 1e-7, ratio_y >= 1.0 - 1e-7) {
        (true, false) => true,
        (false, true) => false,
        (true, true) => ratio_x >= ratio_y,
        (false, false) => {
            return Err(RealifyError::NoIntersectionFound {
                residual: (1.0 - ratio_x.max(ratio_y)).max(0.0),
            })
        }
    };
    let (comp, form) = if pick_x { (work.x, ax) } else { (work.y, ay) };
    let inv = 1.0 / form.sqrt();
    let mut v = [0.0; 4];
    for k in 0..4 {
        v[k] = comp[k] * inv;
    }
    Ok(v)
}
