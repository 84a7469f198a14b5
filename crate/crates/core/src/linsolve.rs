//! Small dense linear solves: LU with partial pivoting for fixed-size systems
//! and a Jacobi eigenvalue sweep for small symmetric matrices.
//!
//! Everything here operates on stack arrays; the largest system in the solver
//! is the 6x6 KKT path matrix.

/// A matrix was singular to working precision.
#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("singular linear system (pivot {pivot:.3e} below threshold {threshold:.3e})")]
pub struct Singular {
    pub pivot: f64,
    pub threshold: f64,
}

/// Relative pivot threshold: a pivot smaller than `1e-12 * max|entry|` of the
/// original matrix is treated as zero.
pub const PIVOT_REL_TOL: f64 = 1e-12;

/// Solves `a x = b` by LU factorization with partial pivoting.
///
/// Returns the solution together with `det(a)` accumulated from the pivots.
/// Elimination updates full rows (the leading entries are dead after the
/// pivot column is fixed), which keeps the inner loops branch-free.
#[inline]
pub fn lu_solve<const N: usize>(mut a: [[f64; N]; N], mut b: [f64; N]) -> Result<([f64; N], f64), Singular> {
    let mut max_norm = 0.0f64;
    for row in &a {
        for &v in row {
            max_norm = max_norm.max(v.abs());
        }
    }
    let threshold = PIVOT_REL_TOL * max_norm.max(f64::MIN_POSITIVE);
    let mut det = 1.0;

    for col in 0..N {
        let mut pivot_row = col;
        let mut pivot_val = a[col][col].abs();
        for row in col + 1..N {
            let v = a[row][col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = row;
            }
        }
        if pivot_val < threshold {
            return Err(Singular {
                pivot: pivot_val,
                threshold,
            });
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            b.swap(pivot_row, col);
            det = -det;
        }
        let pivot = a[col][col];
        det *= pivot;
        let inv = 1.0 / pivot;
        let (upper, lower) = a.split_at_mut(col + 1);
        let pivot_row_vals = &upper[col];
        for (off, row) in lower.iter_mut().enumerate() {
            let factor = row[col] * inv;
            for k in 0..N {
                row[k] -= factor * pivot_row_vals[k];
            }
            b[col + 1 + off] -= factor * b[col];
        }
    }

    // Back substitution.
    let mut x = [0.0; N];
    for col in (0..N).rev() {
        let mut sum = b[col];
        for k in col + 1..N {
            sum -= a[col][k] * x[k];
        }
        x[col] = sum / a[col][col];
    }
    Ok((x, det))
}

/// Solves a 6x6 system in augmented form (row-major, column 6 carries the
/// right-hand side, column 7 pads each row to a power-of-two width so the
/// elimination loop vectorizes). Same partial-pivoting algorithm as
/// [`lu_solve`], specialized for the path solver's hot loop. Marked
/// `inline(always)` so wide-register callers compile their own copy.
#[inline(always)]
pub fn lu_solve6_aug(mut rows: [[f64; 8]; 6]) -> Result<([f64; 6], f64), Singular> {
    let mut max_norm = 0.0f64;
    for row in &rows {
        for &v in &row[..6] {
            max_norm = max_norm.max(v.abs());
        }
    }
    let threshold = PIVOT_REL_TOL * max_norm.max(f64::MIN_POSITIVE);
    let mut det = 1.0;

    for col in 0..6 {
        let mut pivot_row = col;
        let mut pivot_val = rows[col][col].abs();
        for r in col + 1..6 {
            let v = rows[r][col].abs();
            if v > pivot_val {
                pivot_val = v;
                pivot_row = r;
            }
        }
        if pivot_val < threshold {
            return Err(Singular { pivot: pivot_val, threshold });
        }
        if pivot_row != col {
            rows.swap(pivot_row, col);
            det = -det;
        }
        let pivot = rows[col][col];
        det *= pivot;
        let inv = 1.0 / pivot;
        let (upper, lower) = rows.split_at_mut(col + 1);
        let prow = &upper[col];
        for row in lower.iter_mut() {
            let factor = row[col] * inv;
            for k in 0..8 {
                row[k] -= factor * prow[k];
            }
        }
    }

    let mut x = [0.0; 6];
    for col in (0..6).rev() {
        let mut sum = rows[col][6];
        for k in col + 1..6 {
            sum -= rows[col][k] * x[k];
        }
        x[col] = sum / rows[col][col];
    }
    Ok((x, det))
}

/// Eigenvalues of a small symmetric matrix by cyclic Jacobi rotations.
///
/// Input is consumed as a dense row-major `n x n` matrix; symmetry is assumed
/// (only the upper triangle drives the rotations, both are updated). Returns
/// eigenvalues sorted in descending order.
pub fn sym_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    if n == 0 {
        return Vec::new();
    }
    debug_assert!(a.iter().all(|row| row.len() == n));

    let off = |a: &Vec<Vec<f64>>| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                s += a[i][j] * a[i][j];
            }
        }
        s
    };
    let scale: f64 = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0f64, |acc, &v| acc.max(v.abs()))
        .max(f64::MIN_POSITIVE);

    for _sweep in 0..64 {
        if off(&a).sqrt() <= 1e-15 * scale * (n as f64) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() <= 1e-18 * scale {
                    continue;
                }
                let theta = 0.5 * (2.0 * a[p][q]).atan2(a[p][p] - a[q][q]);
                let (s, c) = theta.sin_cos();
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp + s * akq;
                    a[k][q] = -s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk + s * aqk;
                    a[q][k] = -s * apk + c * aqk;
                }
            }
        }
    }

    let mut eigs: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    eigs.sort_by(|x, y| y.partial_cmp(x).unwrap());
    eigs
}
