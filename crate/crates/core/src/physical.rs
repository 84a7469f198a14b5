//! Physical two-way-relay instance and evaluation of relay power and
//! per-terminal SINR for an arbitrary complex beamforming matrix.
//!
//! Terminals `S1` and `S2` (one antenna each) exchange data through a relay
//! with `M` antennas. With channel vectors `h1`, `h2` and beamformer `A`, the
//! relay transmit power is
//!
//! ```text
//! G(A) = ||A h1||^2 p1 + ||A h2||^2 p2 + tr(A^H A) sigma_r2
//! ```
//!
//! and the SINR at terminal `i` (with `k = 3 - i`, after self-interference
//! cancellation) is
//!
//! ```text
//! SINR_i(A) = |h_i^T A h_k|^2 p_k / (||h_i^T A||^2 sigma_r2 + sigma_i2)
//! ```

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// A dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = Complex64::ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// `self * rhs`.
    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(self.cols, rhs.rows, "matrix product dimension mismatch");
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let aik = self[(i, k)];
                if aik == Complex64::ZERO {
                    continue;
                }
                for j in 0..rhs.cols {
                    out[(i, j)] += aik * rhs[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, v.len(), "matrix-vector dimension mismatch");
        (0..self.rows)
            .map(|i| {
                (0..self.cols)
                    .map(|j| self[(i, j)] * v[j])
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Row-vector product `v^T self` (no conjugation).
    pub fn vec_mul(&self, v: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.rows, v.len(), "vector-matrix dimension mismatch");
        (0..self.cols)
            .map(|j| {
                (0..self.rows)
                    .map(|i| v[i] * self[(i, j)])
                    .sum::<Complex64>()
            })
            .collect()
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    /// Entrywise conjugate.
    pub fn conj(&self) -> CMat {
        CMat::from_fn(self.rows, self.cols, |i, j| self[(i, j)].conj())
    }

    /// Squared Frobenius norm `tr(A^H A)`.
    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn scale(&self, s: Complex64) -> CMat {
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        CMat {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Singular values in descending order.
    ///
    /// One-sided Jacobi on the real `2m x 2n` embedding `[[X, -Y], [Y, X]]`
    /// (whose singular values are those of the complex matrix, doubled).
    /// Column orthogonalization keeps full relative accuracy for the small
    /// singular values, which the rank checks depend on.
    pub fn singular_values(&self) -> Vec<f64> {
        let m = 2 * self.rows;
        let n = 2 * self.cols;
        // Column-major storage of the embedding.
        let mut cols: Vec<Vec<f64>> = vec![vec![0.0; m]; n];
        for j in 0..self.cols {
            for i in 0..self.rows {
                let z = self[(i, j)];
                cols[j][i] = z.re;
                cols[j][self.rows + i] = z.im;
                cols[self.cols + j][i] = -z.im;
                cols[self.cols + j][self.rows + i] = z.re;
            }
        }

        for _sweep in 0..60 {
            let mut rotated = false;
            for p in 0..n {
                for q in p + 1..n {
                    let (mut app, mut aqq, mut apq) = (0.0, 0.0, 0.0);
                    for i in 0..m {
                        app += cols[p][i] * cols[p][i];
                        aqq += cols[q][i] * cols[q][i];
                        apq += cols[p][i] * cols[q][i];
                    }
                    if apq.abs() <= 1e-300 + 1e-15 * (app * aqq).sqrt() {
                        continue;
                    }
                    rotated = true;
                    let tau = (aqq - app) / (2.0 * apq);
                    let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                    let c = 1.0 / (1.0 + t * t).sqrt();
                    let s = c * t;
                    for i in 0..m {
                        let vp = cols[p][i];
                        let vq = cols[q][i];
                        cols[p][i] = c * vp - s * vq;
                        cols[q][i] = s * vp + c * vq;
                    }
                }
            }
            if !rotated {
                break;
            }
        }

        let mut sv: Vec<f64> = cols
            .iter()
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .collect();
        sv.sort_by(|a, b| b.partial_cmp(a).unwrap());
        // The embedding duplicates every singular value.
        sv.into_iter().step_by(2).collect()
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.cols + j]
    }
}

/// A complete physical instance: channels, powers, noise, SINR targets.
///
/// SINR targets are stored on a linear scale.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysicalProblem {
    pub antennas: usize,
    pub h1: Vec<Complex64>,
    pub h2: Vec<Complex64>,
    pub p1: f64,
    pub p2: f64,
    pub sigma_r2: f64,
    pub sigma1_2: f64,
    pub sigma2_2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl PhysicalProblem {
    pub fn power(&self, i: usize) -> f64 {
        match i {
            1 => self.p1,
            2 => self.p2,
            _ => panic!("terminal index must be 1 or 2, got {i}"),
        }
    }

    pub fn gamma(&self, i: usize) -> f64 {
        match i {
            1 => self.gamma1,
            2 => self.gamma2,
            _ => panic!("terminal index must be 1 or 2, got {i}"),
        }
    }

    pub fn sigma2(&self, i: usize) -> f64 {
        match i {
            1 => self.sigma1_2,
            2 => self.sigma2_2,
            _ => panic!("terminal index must be 1 or 2, got {i}"),
        }
    }

    pub fn channel(&self, i: usize) -> &[Complex64] {
        match i {
            1 => &self.h1,
            2 => &self.h2,
            _ => panic!("terminal index must be 1 or 2, got {i}"),
        }
    }

    fn check_dims(&self, a: &CMat) {
        assert_eq!(
            (a.rows, a.cols),
            (self.antennas, self.antennas),
            "beamforming matrix must be {m}x{m}",
            m = self.antennas
        );
        assert_eq!(self.h1.len(), self.antennas, "h1 length mismatch");
        assert_eq!(self.h2.len(), self.antennas, "h2 length mismatch");
    }
}

/// Relay transmit power `||A h1||^2 p1 + ||A h2||^2 p2 + tr(A^H A) sigma_r2`.
///
/// Panics on dimension mismatch.
pub fn relay_power(a: &CMat, prob: &PhysicalProblem) -> f64 {
    prob.check_dims(a);
    let ah1 = a.mul_vec(&prob.h1);
    let ah2 = a.mul_vec(&prob.h2);
    let n1: f64 = ah1.iter().map(|z| z.norm_sqr()).sum();
    let n2: f64 = ah2.iter().map(|z| z.norm_sqr()).sum();
    n1 * prob.p1 + n2 * prob.p2 + a.frobenius_sq() * prob.sigma_r2
}

/// SINR at terminal `i` (linear scale), `k = 3 - i`.
pub fn sinr(i: usize, a: &CMat, prob: &PhysicalProblem) -> f64 {
    prob.check_dims(a);
    let k = 3 - i;
    let row = a.vec_mul(prob.channel(i)); // h_i^T A
    let signal: Complex64 = row
        .iter()
        .zip(prob.channel(k))
        .map(|(r, h)| r * h)
        .sum();
    let leak: f64 = row.iter().map(|z| z.norm_sqr()).sum();
    signal.norm_sqr() * prob.power(k) / (leak * prob.sigma_r2 + prob.sigma2(i))
}

/// Signed constraint slack `f_i(A) - gamma_i sigma_i2`, nonnegative exactly
/// when `SINR_i(A) >= gamma_i`.
pub fn constraint_margin(i: usize, a: &CMat, prob: &PhysicalProblem) -> f64 {
    prob.check_dims(a);
    let k = 3 - i;
    let row = a.vec_mul(prob.channel(i));
    let signal: Complex64 = row
        .iter()
        .zip(prob.channel(k))
        .map(|(r, h)| r * h)
        .sum();
    let leak: f64 = row.iter().map(|z| z.norm_sqr()).sum();
    signal.norm_sqr() * prob.power(k) - leak * prob.sigma_r2 * prob.gamma(i)
        - prob.gamma(i) * prob.sigma2(i)
}

/// Distribution and system parameters for seeded random instances.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelEnsemble {
    /// Per-link amplitude scales for `h1` and `h2` (entries are CSCG with
    /// variance `scale^2` each).
    pub scale1: f64,
    pub scale2: f64,
    pub p1: f64,
    pub p2: f64,
    pub sigma_r2: f64,
    pub sigma1_2: f64,
    pub sigma2_2: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for ChannelEnsemble {
    fn default() -> Self {
        ChannelEnsemble {
            scale1: 1.0,
            scale2: 1.0,
            p1: 1.0,
            p2: 1.0,
            sigma_r2: 0.1,
            sigma1_2: 0.1,
            sigma2_2: 0.1,
            gamma1: 1.0,
            gamma2: 1.0,
        }
    }
}

/// Draws a physical instance with i.i.d. unit-variance CSCG channel entries
/// (Rayleigh fading). Deterministic for a given seed: `h1` is drawn first,
/// then `h2`, each entry as (re, im).
pub fn random_channels(seed: u64, antennas: usize, ens: &ChannelEnsemble) -> PhysicalProblem {
    assert!(antennas >= 2, "need at least 2 relay antennas");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut draw = |scale: f64| -> Vec<Complex64> {
        (0..antennas)
            .map(|_| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                Complex64::new(re * half * scale, im * half * scale)
            })
            .collect()
    };
    let h1 = draw(ens.scale1);
    let h2 = draw(ens.scale2);
    PhysicalProblem {
        antennas,
        h1,
        h2,
        p1: ens.p1,
        p2: ens.p2,
        sigma_r2: ens.sigma_r2,
        sigma1_2: ens.sigma1_2,
        sigma2_2: ens.sigma2_2,
        gamma1: ens.gamma1,
        gamma2: ens.gamma2,
    }
}
