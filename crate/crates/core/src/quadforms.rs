//! Operator algebra for the reduced 2x2 problem.
//!
//! The reduced objective and constraints are quadratic forms over the
//! row-major vectorization of a real 2x2 matrix:
//!
//! ```text
//! G(a)   = q1 ||a t1||^2 + q2 ||a t2||^2 + tr(a^T a)      = vec(a)^T M vec(a)
//! f_i(a) = c_i (t_i^T a t_k)^2 - w d_i ||t_i^T a||^2      = vec(a)^T Q_i^(w) vec(a)
//! ```
//!
//! with constraint direction vectors `t_1 = [1, r]`, `t_2 = [1, -r]` and
//! `k = 3 - i`. This module builds the 4x4 matrices `M` and `Q_i^(w)` from
//! the lift operators `underline` and `tilde` and also evaluates both forms
//! directly from the definitions, so the two routes can be checked against
//! each other.
//!
//! Convention used everywhere in this crate: `vec(a) = [a11, a12, a21, a22]`
//! (row-major). Mixing conventions silently breaks the form equivalences, so
//! no other ordering appears anywhere.

/// A real 2x2 matrix, stored as rows.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mat2(pub [[f64; 2]; 2]);

/// Row-major vectorization of a [`Mat2`]: `[a11, a12, a21, a22]`.
pub type Vec4 = [f64; 4];

/// A real 4x4 matrix, stored as rows.
pub type Mat4 = [[f64; 4]; 4];

impl Mat2 {
    pub fn zero() -> Self {
        Mat2([[0.0; 2]; 2])
    }

    pub fn identity() -> Self {
        Mat2([[1.0, 0.0], [0.0, 1.0]])
    }

    /// Matrix product `self * rhs`.
    pub fn mul(&self, rhs: &Mat2) -> Mat2 {
        let a = &self.0;
        let b = &rhs.0;
        let mut out = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
            }
        }
        Mat2(out)
    }
}

/// Constraint direction vector `t_i = [1, sign * r]^T` with `r > 0`.
///
/// `sign` is `+1` for terminal 1 and `-1` for terminal 2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tau {
    pub r: f64,
    pub sign: f64,
}

impl Tau {
    /// The `(t_1, t_2)` pair sharing a single positive `r`.
    pub fn pair(r: f64) -> (Tau, Tau) {
        assert!(r > 0.0 && r.is_finite(), "tau requires positive finite r, got {r}");
        (Tau { r, sign: 1.0 }, Tau { r, sign: -1.0 })
    }

    pub fn vector(&self) -> [f64; 2] {
        [1.0, self.sign * self.r]
    }

    /// Outer product `t_i t_i^T = [[1, s r], [s r, r^2]]`.
    pub fn outer(&self) -> Mat2 {
        let sr = self.sign * self.r;
        Mat2([[1.0, sr], [sr, self.r * self.r]])
    }
}

/// `vec(m) = [m11, m12, m21, m22]`.
pub fn vec_of(m: &Mat2) -> Vec4 {
    [m.0[0][0], m.0[0][1], m.0[1][0], m.0[1][1]]
}

/// Inverse of [`vec_of`].
pub fn mat_of(v: &Vec4) -> Mat2 {
    Mat2([[v[0], v[1]], [v[2], v[3]]])
}

/// Block-diagonal lift `[[m, 0], [0, m]]`.
///
/// Acts on vectorized matrices as right multiplication:
/// `underline(m) vec(a) = vec(a m^T)`.
pub fn underline_of(m: &Mat2) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = m.0[i][j];
            out[2 + i][2 + j] = m.0[i][j];
        }
    }
    out
}

/// Interleaved lift `[[m11 I, m21 I], [m12 I, m22 I]]` (note the transposed
/// placement of the off-diagonal entries).
///
/// Acts on vectorized matrices as left multiplication:
/// `tilde(m) vec(a) = vec(m^T a)`.
pub fn tilde_of(m: &Mat2) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            // Block (i, j) is m[j][i] * I2.
            out[2 * i][2 * j] = m.0[j][i];
            out[2 * i + 1][2 * j + 1] = m.0[j][i];
        }
    }
    out
}

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            let mut s = 0.0;
            for k in 0..4 {
                s += a[i][k] * b[k][j];
            }
            out[i][j] = s;
        }
    }
    out
}

/// `m v` for a 4x4 matrix and 4-vector.
#[inline]
pub fn mat4_vec(m: &Mat4, v: &Vec4) -> Vec4 {
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2] + m[i][3] * v[3];
    }
    out
}

/// `v^T m v`.
#[inline]
pub fn quad_form(m: &Mat4, v: &Vec4) -> f64 {
    dot4(v, &mat4_vec(m, v))
}

#[inline]
pub fn dot4(a: &Vec4, b: &Vec4) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2] + a[3] * b[3]
}

#[inline]
pub fn norm4(a: &Vec4) -> f64 {
    dot4(a, a).sqrt()
}

/// Symmetrizes `q` in place and asserts the pre-symmetrization asymmetry is
/// below `1e-12` relative to the largest entry. Downstream eigen and linear
/// solves assume exact symmetry.
fn symmetrize_checked(q: &mut Mat4) {
    let scale = q
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    for i in 0..4 {
        for j in i + 1..4 {
            let asym = (q[i][j] - q[j][i]).abs();
            assert!(
                asym <= 1e-12 * scale,
                "matrix asymmetry {asym:.3e} exceeds 1e-12 relative at ({i},{j})"
            );
            let v = 0.5 * (q[i][j] + q[j][i]);
            q[i][j] = v;
            q[j][i] = v;
        }
    }
}

/// Objective matrix `M = underline(q1 t11 + q2 t22 + I)`.
///
/// Symmetric positive definite with every eigenvalue at least 1.
pub fn build_m(q1: f64, q2: f64, t1: &Tau, t2: &Tau) -> Mat4 {
    let t11 = t1.outer().0;
    let t22 = t2.outer().0;
    let mut m = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = q1 * t11[i][j] + q2 * t22[i][j];
        }
        m[i][i] += 1.0;
    }
    underline_of(&Mat2(m))
}

/// Constraint matrix `Q_i^(w) = c_i T_ki - w d_i tilde(t_ii)` with
/// `T_ki = underline(t_kk) tilde(t_ii)` and `k = 3 - i` (`i` is 1 or 2).
///
/// The product is explicitly symmetrized; the pre-symmetrization defect is
/// asserted below `1e-12` relative.
pub fn build_q(i: usize, w: f64, c_i: f64, d_i: f64, t1: &Tau, t2: &Tau) -> Mat4 {
    assert!(i == 1 || i == 2, "constraint index must be 1 or 2, got {i}");
    let (ti, tk) = if i == 1 { (t1, t2) } else { (t2, t1) };
    let t_ki = mat4_mul(&underline_of(&tk.outer()), &tilde_of(&ti.outer()));
    let tilde_ii = tilde_of(&ti.outer());
    let mut q = [[0.0; 4]; 4];
    for row in 0..4 {
        for col in 0..4 {
            q[row][col] = c_i * t_ki[row][col] - w * d_i * tilde_ii[row][col];
        }
    }
    symmetrize_checked(&mut q);
    q
}

/// Transmit power of a reduced beamformer, straight from the definition:
/// `G(a) = q1 ||a t1||^2 + q2 ||a t2||^2 + tr(a^T a)`.
pub fn evaluate_g_direct(a: &Mat2, q1: f64, q2: f64, t1: &Tau, t2: &Tau) -> f64 {
    let at1 = mat2_vec(a, &t1.vector());
    let at2 = mat2_vec(a, &t2.vector());
    let trace = a.0[0][0] * a.0[0][0]
        + a.0[0][1] * a.0[0][1]
        + a.0[1][0] * a.0[1][0]
        + a.0[1][1] * a.0[1][1];
    q1 * sq_norm2(&at1) + q2 * sq_norm2(&at2) + trace
}

/// Constraint quadratic form, straight from the definition:
/// `f_i(a) = c_i (t_i^T a t_k)^2 - d_i ||t_i^T a||^2` with `k = 3 - i`.
///
/// Pass `w * d_i` as `d_i` to evaluate the homotopy-deformed constraint.
pub fn evaluate_f_direct(i: usize, a: &Mat2, c_i: f64, d_i: f64, t1: &Tau, t2: &Tau) -> f64 {
    assert!(i == 1 || i == 2, "constraint index must be 1 or 2, got {i}");
    let (ti, tk) = if i == 1 { (t1, t2) } else { (t2, t1) };
    let row = vec2_mat(&ti.vector(), a); // t_i^T a
    let cross = row[0] * tk.vector()[0] + row[1] * tk.vector()[1];
    c_i * cross * cross - d_i * sq_norm2(&row)
}

fn mat2_vec(m: &Mat2, v: &[f64; 2]) -> [f64; 2] {
    [
        m.0[0][0] * v[0] + m.0[0][1] * v[1],
        m.0[1][0] * v[0] + m.0[1][1] * v[1],
    ]
}

fn vec2_mat(v: &[f64; 2], m: &Mat2) -> [f64; 2] {
    [
        v[0] * m.0[0][0] + v[1] * m.0[1][0],
        v[0] * m.0[0][1] + v[1] * m.0[1][1],
    ]
}

fn sq_norm2(v: &[f64; 2]) -> f64 {
    v[0] * v[0] + v[1] * v[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linsolve::sym_eigenvalues;

    fn approx(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn vec_of_row_major() {
        let m = Mat2([[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(vec_of(&m), [1.0, 2.0, 3.0, 4.0]);
        assert_eq!(vec_of(&Mat2::zero()), [0.0; 4]);
        assert_eq!(vec_of(&Mat2::identity()), [1.0, 0.0, 0.0, 1.0]);
        assert_eq!(mat_of(&vec_of(&m)), m);
    }

    #[test]
    fn underline_blocks() {
        let m = Mat2([[1.0, 2.0], [3.0, 4.0]]);
        let u = underline_of(&m);
        let expected = [
            [1.0, 2.0, 0.0, 0.0],
            [3.0, 4.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, 2.0],
            [0.0, 0.0, 3.0, 4.0],
        ];
        assert_eq!(u, expected);
        assert_eq!(underline_of(&Mat2::identity()), identity4());
        assert_eq!(underline_of(&Mat2::zero()), [[0.0; 4]; 4]);
    }

    #[test]
    fn tilde_transposed_blocks() {
        let m = Mat2([[1.0, 2.0], [3.0, 4.0]]);
        let t = tilde_of(&m);
        let expected = [
            [1.0, 0.0, 3.0, 0.0],
            [0.0, 1.0, 0.0, 3.0],
            [2.0, 0.0, 4.0, 0.0],
            [0.0, 2.0, 0.0, 4.0],
        ];
        assert_eq!(t, expected);
        assert_eq!(tilde_of(&Mat2::identity()), identity4());
    }

    #[test]
    fn tilde_of_symmetric_is_symmetric() {
        let m = Mat2([[1.5, -0.7], [-0.7, 2.5]]);
        let t = tilde_of(&m);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(t[i][j], t[j][i]);
            }
        }
    }

    #[test]
    fn underline_acts_as_right_mul() {
        let m = Mat2([[0.3, -1.2], [2.0, 0.8]]);
        let a = Mat2([[1.0, -0.5], [0.25, 2.0]]);
        let lhs = mat4_vec(&underline_of(&m), &vec_of(&a));
        let rhs = vec_of(&a.mul(&transpose(&m)));
        for k in 0..4 {
            assert!((lhs[k] - rhs[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn tilde_acts_as_left_mul() {
        let m = Mat2([[0.3, -1.2], [2.0, 0.8]]);
        let a = Mat2([[1.0, -0.5], [0.25, 2.0]]);
        let lhs = mat4_vec(&tilde_of(&m), &vec_of(&a));
        let rhs = vec_of(&transpose(&m).mul(&a));
        for k in 0..4 {
            assert!((lhs[k] - rhs[k]).abs() < 1e-14);
        }
    }

    #[test]
    fn tau_outer_values() {
        let (t1, t2) = Tau::pair(1.0);
        assert_eq!(t1.outer(), Mat2([[1.0, 1.0], [1.0, 1.0]]));
        assert_eq!(t2.outer(), Mat2([[1.0, -1.0], [-1.0, 1.0]]));
        let (t1, _) = Tau::pair(2.0);
        assert_eq!(t1.outer(), Mat2([[1.0, 2.0], [2.0, 4.0]]));
    }

    #[test]
    fn build_m_values() {
        let (t1, t2) = Tau::pair(1.0);
        assert_eq!(build_m(0.0, 0.0, &t1, &t2), identity4());
        let m = build_m(1.0, 0.0, &t1, &t2);
        assert_eq!(m, underline_of(&Mat2([[2.0, 1.0], [1.0, 2.0]])));
        let m = build_m(1.0, 1.0, &t1, &t2);
        assert_eq!(m, underline_of(&Mat2([[3.0, 0.0], [0.0, 3.0]])));
    }

    #[test]
    fn build_q_hand_values() {
        let (t1, t2) = Tau::pair(1.0);
        // q1 = underline(t22) tilde(t11) with c1 = 1, d1 = 0.
        let q1 = build_q(1, 0.37, 1.0, 0.0, &t1, &t2);
        let expected1 = [
            [1.0, -1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0, 1.0],
            [1.0, -1.0, 1.0, -1.0],
            [-1.0, 1.0, -1.0, 1.0],
        ];
        assert_eq!(q1, expected1);
        let q2 = build_q(2, 0.0, 1.0, 0.0, &t1, &t2);
        let expected2 = [
            [1.0, 1.0, -1.0, -1.0],
            [1.0, 1.0, -1.0, -1.0],
            [-1.0, -1.0, 1.0, 1.0],
            [-1.0, -1.0, 1.0, 1.0],
        ];
        assert_eq!(q2, expected2);
    }

    #[test]
    fn build_q_w_zero_drops_d() {
        let (t1, t2) = Tau::pair(0.7);
        let a = build_q(1, 0.0, 1.3, 0.9, &t1, &t2);
        let b = build_q(1, 0.55, 1.3, 0.0, &t1, &t2);
        assert_eq!(a, b);
    }

    #[test]
    fn g_direct_hand_values() {
        let (t1, t2) = Tau::pair(1.0);
        assert_eq!(evaluate_g_direct(&Mat2::zero(), 1.0, 2.0, &t1, &t2), 0.0);
        assert_eq!(evaluate_g_direct(&Mat2::identity(), 0.0, 0.0, &t1, &t2), 2.0);
        assert_eq!(evaluate_g_direct(&Mat2::identity(), 1.0, 0.0, &t1, &t2), 4.0);
    }

    #[test]
    fn f_direct_hand_values() {
        let (t1, t2) = Tau::pair(1.0);
        assert_eq!(evaluate_f_direct(1, &Mat2::zero(), 1.0, 0.0, &t1, &t2), 0.0);
        let a = Mat2([[1.0, 0.0], [0.0, 0.0]]);
        assert_eq!(evaluate_f_direct(1, &a, 1.0, 0.0, &t1, &t2), 1.0);
        assert_eq!(evaluate_f_direct(1, &Mat2::identity(), 1.0, 1.0, &t1, &t2), -2.0);
    }


    mod properties {
        use super::*;
        use proptest::prelude::*;

        fn tau_r() -> impl Strategy<Value = f64> {
            0.2f64..2.0
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // vec^T M vec and the direct objective agree for all parameters.
            #[test]
            fn objective_equivalence(
                r in tau_r(),
                q1 in 0.0f64..3.0,
                q2 in 0.0f64..3.0,
                entries in proptest::array::uniform4(-3.0f64..3.0),
            ) {
                let (t1, t2) = Tau::pair(r);
                let a = mat_of(&entries);
                let lhs = quad_form(&build_m(q1, q2, &t1, &t2), &entries);
                let rhs = evaluate_g_direct(&a, q1, q2, &t1, &t2);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
            }

            // vec^T Q_i^(w) vec matches the deformed direct constraint.
            #[test]
            fn constraint_equivalence(
                r in tau_r(),
                c in 0.1f64..5.0,
                d in 0.0f64..3.0,
                w in 0.0f64..1.0,
                i in 1usize..3,
                entries in proptest::array::uniform4(-3.0f64..3.0),
            ) {
                let (t1, t2) = Tau::pair(r);
                let a = mat_of(&entries);
                let lhs = quad_form(&build_q(i, w, c, d, &t1, &t2), &entries);
                let rhs = evaluate_f_direct(i, &a, c, w * d, &t1, &t2);
                prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
            }

            // underline and tilde commute for arbitrary matrices.
            #[test]
            fn lift_operators_commute(
                x in proptest::array::uniform4(-3.0f64..3.0),
                y in proptest::array::uniform4(-3.0f64..3.0),
            ) {
                let a = mat_of(&x);
                let b = mat_of(&y);
                let lhs = mat4_mul(&underline_of(&a), &tilde_of(&b));
                let rhs = mat4_mul(&tilde_of(&b), &underline_of(&a));
                for i in 0..4 {
                    for j in 0..4 {
                        prop_assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-12);
                    }
                }
            }
        }
    }

    fn transpose(m: &Mat2) -> Mat2 {
        Mat2([[m.0[0][0], m.0[1][0]], [m.0[0][1], m.0[1][1]]])
    }

    fn identity4() -> Mat4 {
        let mut m = [[0.0; 4]; 4];
        for i in 0..4 {
            m[i][i] = 1.0;
        }
        m
    }

    fn sample_instance(seed: u64) -> (f64, f64, f64, f64, f64, f64, f64, f64) {
        // Cheap deterministic pseudo-random parameters for property checks.
        let mut s = seed.wrapping_mul(0x9e3779b97f4a7c15).wrapping_add(1);
        let mut next = move || {
            s ^= s << 13;
            s ^= s >> 7;
            s ^= s << 17;
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let r = 0.25 + 1.5 * next();
        let q1 = 2.0 * next();
        let q2 = 2.0 * next();
        let c1 = 0.2 + 4.0 * next();
        let c2 = 0.2 + 4.0 * next();
        let d1 = 2.0 * next();
        let d2 = 2.0 * next();
        let w = next();
        (r, q1, q2, c1, c2, d1, d2, w)
    }

    #[test]
    fn quadratic_form_equivalence_random() {
        for seed in 0..200u64 {
            let (r, q1, q2, c1, c2, d1, d2, w) = sample_instance(seed);
            let (t1, t2) = Tau::pair(r);
            let a = Mat2([
                [sample_instance(seed + 1000).0 - 1.0, sample_instance(seed + 2000).0 - 1.0],
                [sample_instance(seed + 3000).0 - 1.0, sample_instance(seed + 4000).0 - 1.0],
            ]);
            let v = vec_of(&a);

            let g_mat = quad_form(&build_m(q1, q2, &t1, &t2), &v);
            let g_dir = evaluate_g_direct(&a, q1, q2, &t1, &t2);
            assert!(approx(g_mat, g_dir, 1e-12), "G mismatch: {g_mat} vs {g_dir}");

            for (i, (c, d)) in [(1usize, (c1, d1)), (2, (c2, d2))] {
                let f_mat = quad_form(&build_q(i, w, c, d, &t1, &t2), &v);
                let f_dir = evaluate_f_direct(i, &a, c, w * d, &t1, &t2);
                assert!(approx(f_mat, f_dir, 1e-12), "f_{i} mismatch: {f_mat} vs {f_dir}");
            }
        }
    }

    #[test]
    fn underline_tilde_commute() {
        for seed in 0..50u64 {
            let (r, q1, q2, c1, c2, _, _, _) = sample_instance(seed);
            let a = Mat2([[r, q1], [q2, c1]]);
            let b = Mat2([[c2, -r], [q1 - 1.0, 0.5]]);
            let lhs = mat4_mul(&underline_of(&a), &tilde_of(&b));
            let rhs = mat4_mul(&tilde_of(&b), &underline_of(&a));
            for i in 0..4 {
                for j in 0..4 {
                    assert!((lhs[i][j] - rhs[i][j]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn build_m_eigenvalues_at_least_one() {
        for seed in 0..50u64 {
            let (r, q1, q2, ..) = sample_instance(seed);
            let (t1, t2) = Tau::pair(r);
            let m = build_m(q1, q2, &t1, &t2);
            let rows: Vec<Vec<f64>> = m.iter().map(|r| r.to_vec()).collect();
            let eigs = sym_eigenvalues(rows);
            assert!(
                eigs.last().copied().unwrap() >= 1.0 - 1e-10,
                "min eigenvalue {} below 1",
                eigs.last().unwrap()
            );
        }
    }
}
