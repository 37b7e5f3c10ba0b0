use alloc::vec;
use alloc::vec::Vec;

use super::matrix::DenseMatrix;
use crate::error::{invalid, Error, Result};

/// Solve AX = B for symmetric positive definite A.
///
/// Cholesky with escalating diagonal jitter: on factorization failure,
/// 1e-12·trace(A)/n·I is added and multiplied by 10 on each retry, up to
/// four retries. A factorization only counts if the solution passes the
/// residual gate ‖AX−B‖_F / max(1, ‖B‖_F) ≤ 1e-8 against the original A,
/// so singular systems whose right-hand side leaves the range still fail.
/// Only the lower triangle of A is read.
pub fn solve_spd(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.rows() != a.cols() {
        return Err(invalid("solve_spd requires a square matrix"));
    }
    if b.rows() != a.rows() {
        return Err(invalid("solve_spd right-hand side row mismatch"));
    }
    let n = a.rows();
    if n == 0 {
        return Err(invalid("solve_spd on an empty matrix"));
    }
    let b_norm = b.frob_norm().max(1.0);
    let base_jitter = 1e-12 * a.trace() / n as f64;
    let mut jitter = 0.0;
    for attempt in 0..=4 {
        if attempt > 0 {
            jitter = if attempt == 1 { base_jitter } else { jitter * 10.0 };
        }
        let mut factor = a.clone();
        if jitter != 0.0 {
            factor.add_diag(jitter);
        }
        if !cholesky_in_place(&mut factor) {
            continue;
        }
        let x = substitute(&factor, b);
        let residual = a.matmul(&x).and_then(|ax| ax.sub(b)).map(|r| r.frob_norm());
        match residual {
            Ok(r) if r.is_finite() && r / b_norm <= 1e-8 => return Ok(x),
            _ => continue,
        }
    }
    Err(Error::SingularMatrix)
}

/// Convenience wrapper for a single right-hand-side vector.
pub fn solve_spd_vec(a: &DenseMatrix, y: &[f64]) -> Result<Vec<f64>> {
    let b = DenseMatrix::from_vec(y.len(), 1, y.to_vec())?;
    let x = solve_spd(a, &b)?;
    Ok(x.data().to_vec())
}

/// In-place lower Cholesky. Returns false on a non-positive pivot.
fn cholesky_in_place(a: &mut DenseMatrix) -> bool {
    let n = a.rows();
    for j in 0..n {
        let mut d = a.get(j, j);
        let rj = j * n;
        for k in 0..j {
            let l = a.data()[rj + k];
            d -= l * l;
        }
        if !(d > 0.0) || !d.is_finite() {
            return false;
        }
        let ljj = libm::sqrt(d);
        a.set(j, j, ljj);
        for i in (j + 1)..n {
            let ri = i * n;
            let mut s = a.data()[ri + j];
            for k in 0..j {
                s -= a.data()[ri + k] * a.data()[rj + k];
            }
            a.data_mut()[ri + j] = s / ljj;
        }
    }
    // Zero the stale upper triangle so the factor is a clean lower matrix.
    for i in 0..n {
        for j in (i + 1)..n {
            a.data_mut()[i * n + j] = 0.0;
        }
    }
    true
}

/// Forward and back substitution with a lower Cholesky factor, one
/// right-hand-side column at a time.
fn substitute(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows();
    let k = b.cols();
    let mut x = DenseMatrix::zeros(n, k);
    let mut col = vec![0.0; n];
    for c in 0..k {
        for i in 0..n {
            col[i] = b.get(i, c);
        }
        // L y = b
        for i in 0..n {
            let ri = i * n;
            let mut s = col[i];
            for j in 0..i {
                s -= l.data()[ri + j] * col[j];
            }
            col[i] = s / l.data()[ri + i];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = col[i];
            for j in (i + 1)..n {
                s -= l.data()[j * n + i] * col[j];
            }
            col[i] = s / l.data()[i * n + i];
        }
        for i in 0..n {
            x.set(i, c, col[i]);
        }
    }
    x
}
