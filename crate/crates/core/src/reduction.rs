//! Reduction of a physical instance to the real-coefficient rank-2 problem,
//! and the lift taking a reduced 2x2 solution back to a full beamformer.
//!
//! The optimal beamformer lies in the rank-2 family
//! `A = [conj(h1), conj(h2)] b [h1^H; h2^H]`. Substituting that ansatz leaves
//! every power/SINR expression depending on the channels only through the
//! 2x2 Gram matrix `G` (`G_ij = h_i^H h_j`). Two further changes of variable
//! make all coefficients real:
//!
//! 1. `b = conj(W)^-1 a0 W^-1` with `W = G^(1/2)` (Hermitian square root)
//!    turns the trace term into a plain Frobenius norm and replaces every
//!    channel vector by a column `v_i = W e_i` of `W`.
//! 2. A unitary `U` maps `v_1, v_2` to scaled real vectors `rho_i t_i` with
//!    `t_1 = [1, r]`, `t_2 = [1, -r]`. Such a `U` exists because the target
//!    pair can be given exactly the same Gram matrix as `(v_1, v_2)`:
//!    matching norms fixes `rho_i`, and matching the inner product fixes `r`
//!    through `(1 - r^2)/(1 + r^2) = |G_12| / sqrt(G_11 G_22)` with the phase
//!    of `G_12` absorbed into `U`.
//!
//! Composing the two steps, the lift is `A(a) = conj(B) a B^H` with
//! `B = [h1, h2] G^-1 X^H`, where `X = [rho_1 t_1, e^(j phi) rho_2 t_2]` and
//! `phi = arg(G_12)`. The reduced coefficients come out as
//!
//! ```text
//! q_i = p_i rho_i^2 / sigma_r2          (objective weights)
//! c_i = p_k rho_i^2 rho_k^2 / (gamma_i sigma_i2)
//! d_i = sigma_r2 rho_i^2 / sigma_i2
//! scale = sigma_r2                      (physical watts per reduced power unit)
//! ```
//!
//! The construction is validated end to end by the round-trip identities
//! `relay_power(lift(a)) = scale * G(a)` and
//! `constraint_margin_i(lift(a)) = gamma_i sigma_i2 * (f_i(a) - 1)`; those
//! identities, not the derivation, are the contract.

use num_complex::Complex64;
use thiserror::Error;

use crate::physical::{CMat, PhysicalProblem};
use crate::quadforms::{self, Tau, Vec4};

/// Gram condition number beyond which channels are treated as parallel.
pub const DEGENERACY_COND_LIMIT: f64 = 1e12;

#[derive(Debug, Error)]
pub enum ReduceError {
    /// The channel Gram matrix is singular to working precision; the rank-2
    /// reduction (and the problem's two-sided SINR constraints) degenerate.
    #[error("degenerate channels: Gram condition number {cond:.3e} exceeds {limit:.1e}")]
    DegenerateChannels { cond: f64, limit: f64 },
}

/// Lift data: the `M x 2` basis factor `B` of `A(a) = conj(B) a B^H`.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftMap {
    pub basis: CMat,
}

/// The reduced real-coefficient problem
/// `min G(a) s.t. f_i(a) >= 1` over real 2x2 matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedProblem {
    pub q1: f64,
    pub q2: f64,
    pub c1: f64,
    pub c2: f64,
    pub d1: f64,
    pub d2: f64,
    pub r: f64,
    /// Physical watts per unit of reduced power (1 for bare coefficient sets).
    pub scale: f64,
    /// Present when produced by [`reduce`]; maps 2x2 solutions back to `C^{MxM}`.
    pub lift: Option<LiftMap>,
}

impl ReducedProblem {
    /// A reduced problem from bare coefficients (no physical lift, scale 1).
    pub fn from_coefficients(q1: f64, q2: f64, c1: f64, c2: f64, d1: f64, d2: f64, r: f64) -> Self {
        for (name, v) in [("q1", q1), ("q2", q2), ("d1", d1), ("d2", d2)] {
            assert!(v >= 0.0 && v.is_finite(), "{name} must be finite and >= 0, got {v}");
        }
        for (name, v) in [("c1", c1), ("c2", c2), ("r", r)] {
            assert!(v > 0.0 && v.is_finite(), "{name} must be finite and > 0, got {v}");
        }
        ReducedProblem {
            q1,
            q2,
            c1,
            c2,
            d1,
            d2,
            r,
            scale: 1.0,
            lift: None,
        }
    }

    pub fn tau(&self) -> (Tau, Tau) {
        Tau::pair(self.r)
    }

    pub fn c(&self, i: usize) -> f64 {
        match i {
            1 => self.c1,
            2 => self.c2,
            _ => panic!("constraint index must be 1 or 2, got {i}"),
        }
    }

    pub fn d(&self, i: usize) -> f64 {
        match i {
            1 => self.d1,
            2 => self.d2,
            _ => panic!("constraint index must be 1 or 2, got {i}"),
        }
    }

    /// Objective matrix `M`.
    pub fn m_mat(&self) -> quadforms::Mat4 {
        let (t1, t2) = self.tau();
        quadforms::build_m(self.q1, self.q2, &t1, &t2)
    }

    /// Constraint matrix `Q_i^(w)`.
    pub fn q_mat(&self, i: usize, w: f64) -> quadforms::Mat4 {
        let (t1, t2) = self.tau();
        quadforms::build_q(i, w, self.c(i), self.d(i), &t1, &t2)
    }

    /// `G(a)` evaluated from the definition.
    pub fn g_direct(&self, a: &Vec4) -> f64 {
        let (t1, t2) = self.tau();
        quadforms::evaluate_g_direct(&quadforms::mat_of(a), self.q1, self.q2, &t1, &t2)
    }

    /// `f_i^(w)(a)` evaluated from the definition.
    pub fn f_direct(&self, i: usize, a: &Vec4, w: f64) -> f64 {
        let (t1, t2) = self.tau();
        quadforms::evaluate_f_direct(i, &quadforms::mat_of(a), self.c(i), w * self.d(i), &t1, &t2)
    }

    /// Lifts a real reduced solution to the full complex beamformer.
    ///
    /// Panics if this problem carries no lift data (i.e. it was built from
    /// bare coefficients rather than by [`reduce`]).
    pub fn lift_real(&self, a: &Vec4) -> CMat {
        self.lift_complex(a, &[0.0; 4])
    }

    /// Lifts a complex reduced solution given as (real part, imaginary part).
    pub fn lift_complex(&self, re: &Vec4, im: &Vec4) -> CMat {
        let basis = &self
            .lift
            .as_ref()
            .expect("lift data missing: reduced problem was not produced by reduce()")
            .basis;
        let a2 = CMat::from_fn(2, 2, |i, j| Complex64::new(re[2 * i + j], im[2 * i + j]));
        basis.conj().mul(&a2).mul(&basis.hermitian())
    }
}

/// Transforms a physical instance into the reduced problem.
///
/// Fails with [`ReduceError::DegenerateChannels`] when `h1` and `h2` are
/// parallel to working precision (Gram condition number above `1e12`): the
/// two SINR constraints then collapse onto one direction and the paper's
/// constraint geometry no longer applies.
pub fn reduce(prob: &PhysicalProblem) -> Result<ReducedProblem, ReduceError> {
    assert_eq!(prob.h1.len(), prob.antennas, "h1 length mismatch");
    assert_eq!(prob.h2.len(), prob.antennas, "h2 length mismatch");

    let g11: f64 = prob.h1.iter().map(|z| z.norm_sqr()).sum();
    let g22: f64 = prob.h2.iter().map(|z| z.norm_sqr()).sum();
    let g12: Complex64 = prob
        .h1
        .iter()
        .zip(&prob.h2)
        .map(|(a, b)| a.conj() * b)
        .sum();

    // Gram eigenvalues: trace/determinant form for the 2x2 Hermitian case.
    let trace = g11 + g22;
    let det = g11 * g22 - g12.norm_sqr();
    let disc = (trace * trace - 4.0 * det).max(0.0).sqrt();
    let lam_max = 0.5 * (trace + disc);
    let lam_min = 0.5 * (trace - disc);
    if !(lam_min > 0.0) || lam_max > DEGENERACY_COND_LIMIT * lam_min {
        let cond = if lam_min > 0.0 { lam_max / lam_min } else { f64::INFINITY };
        return Err(ReduceError::DegenerateChannels {
            cond,
            limit: DEGENERACY_COND_LIMIT,
        });
    }

    let kappa = g12.norm() / (g11 * g22).sqrt();
    let r = ((1.0 - kappa) / (1.0 + kappa)).sqrt();
    let one_r2 = 1.0 + r * r;
    let rho1_sq = g11 / one_r2;
    let rho2_sq = g22 / one_r2;
    let phi = if g12.norm() == 0.0 { 0.0 } else { g12.arg() };

    let q1 = prob.p1 * rho1_sq / prob.sigma_r2;
    let q2 = prob.p2 * rho2_sq / prob.sigma_r2;
    let c1 = prob.p2 * rho1_sq * rho2_sq / (prob.gamma1 * prob.sigma1_2);
    let c2 = prob.p1 * rho1_sq * rho2_sq / (prob.gamma2 * prob.sigma2_2);
    let d1 = prob.sigma_r2 * rho1_sq / prob.sigma1_2;
    let d2 = prob.sigma_r2 * rho2_sq / prob.sigma2_2;

    // Target columns X = [rho1 t1, e^{j phi} rho2 t2], chosen so that
    // X^H X equals the Gram matrix of (v1, v2).
    let rho1 = rho1_sq.sqrt();
    let rho2 = rho2_sq.sqrt();
    let e_phi = Complex64::from_polar(1.0, phi);
    let x = CMat::from_fn(2, 2, |i, j| match (i, j) {
        (0, 0) => Complex64::new(rho1, 0.0),
        (1, 0) => Complex64::new(rho1 * r, 0.0),
        (0, 1) => e_phi * rho2,
        (1, 1) => e_phi * (-rho2 * r),
        _ => unreachable!(),
    });

    // B = H G^-1 X^H  (M x 2).
    let g_inv = {
        let mut m = CMat::zeros(2, 2);
        m[(0, 0)] = Complex64::new(g22 / det, 0.0);
        m[(1, 1)] = Complex64::new(g11 / det, 0.0);
        m[(0, 1)] = -g12 / det;
        m[(1, 0)] = -g12.conj() / det;
        m
    };
    let h = CMat::from_fn(prob.antennas, 2, |i, j| {
        if j == 0 {
            prob.h1[i]
        } else {
            prob.h2[i]
        }
    });
    let basis = h.mul(&g_inv).mul(&x.hermitian());

    Ok(ReducedProblem {
        q1,
        q2,
        c1,
        c2,
        d1,
        d2,
        r,
        scale: prob.sigma_r2,
        lift: Some(LiftMap { basis }),
    })
}
