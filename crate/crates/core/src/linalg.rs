//! Small dense linear algebra on slices.
//!
//! Everything here is sized for regression designs with tens of columns, not
//! for large systems: plain Gaussian elimination with partial pivoting and
//! normal-equation least squares are accurate enough at these scales and keep
//! the crate free of a LAPACK binding.

use thiserror::Error;

use crate::Float;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinalgError {
    #[error("singular system (pivot below tolerance at column {column})")]
    Singular { column: usize },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
}

/// `out = m · x` for a row-major `rows × cols` matrix stored in a flat slice.
pub fn matvec<S: Float>(m: &[S], rows: usize, cols: usize, x: &[S], out: &mut [S]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = S::zero();
        for (w, v) in row.iter().zip(x.iter()) {
            acc = acc + *w * *v;
        }
        out[r] = acc;
    }
}

/// Solve `a · x = b` in place; `a` is row-major `n × n`, consumed as scratch.
pub fn solve<S: Float>(a: &mut [S], b: &mut [S]) -> Result<Vec<S>, LinalgError> {
    let n = b.len();
    debug_assert_eq!(a.len(), n * n);
    for col in 0..n {
        let mut pivot = col;
        for r in col + 1..n {
            if a[r * n + col].abs() > a[pivot * n + col].abs() {
                pivot = r;
            }
        }
        if a[pivot * n + col].abs() <= S::cast(1e-300) {
            return Err(LinalgError::Singular { column: col });
        }
        if pivot != col {
            for c in 0..n {
                a.swap(col * n + c, pivot * n + c);
            }
            b.swap(col, pivot);
        }
        let diag = a[col * n + col];
        for r in col + 1..n {
            let factor = a[r * n + col] / diag;
            if factor == S::zero() {
                continue;
            }
            for c in col..n {
                let upd = a[col * n + c] * factor;
                a[r * n + c] = a[r * n + c] - upd;
            }
            b[r] = b[r] - b[col] * factor;
        }
    }
    let mut x = vec![S::zero(); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for c in col + 1..n {
            acc = acc - a[col * n + c] * x[c];
        }
        x[col] = acc / a[col * n + col];
    }
    Ok(x)
}

/// Inverse of a row-major `n × n` matrix, column by column.
pub fn invert<S: Float>(a: &[S], n: usize) -> Result<Vec<S>, LinalgError> {
    let mut inv = vec![S::zero(); n * n];
    for j in 0..n {
        let mut scratch = a.to_vec();
        let mut e = vec![S::zero(); n];
        e[j] = S::one();
        let col = solve(&mut scratch, &mut e)?;
        for i in 0..n {
            inv[i * n + j] = col[i];
        }
    }
    Ok(inv)
}

/// An ordinary least squares fit of `y` on the columns of `x`.
#[derive(Debug, Clone)]
pub struct OlsFit<S> {
    pub coefficients: Vec<S>,
    pub standard_errors: Vec<S>,
    pub residuals: Vec<S>,
    /// Residual sum of squares.
    pub rss: S,
    /// Residual variance `rss / (n - k)`.
    pub sigma2: S,
    /// Ratio of largest to smallest absolute diagonal of X'X, a cheap
    /// conditioning diagnostic for singularity reports.
    pub gram_diag_ratio: S,
}

/// OLS of `y` on a row-major `n × k` design matrix via normal equations.
pub fn ols<S: Float>(x: &[S], n: usize, k: usize, y: &[S]) -> Result<OlsFit<S>, LinalgError> {
    if y.len() != n || x.len() != n * k {
        return Err(LinalgError::Dimension(format!(
            "design {}x{} with {} responses",
            n,
            k,
            y.len()
        )));
    }
    if n <= k {
        return Err(LinalgError::Dimension(format!(
            "need more rows ({n}) than columns ({k})"
        )));
    }
    let mut xtx = vec![S::zero(); k * k];
    let mut xty = vec![S::zero(); k];
    for r in 0..n {
        let row = &x[r * k..(r + 1) * k];
        for i in 0..k {
            xty[i] += row[i] * y[r];
            for j in i..k {
                xtx[i * k + j] += row[i] * row[j];
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            xtx[i * k + j] = xtx[j * k + i];
        }
    }
    let mut max_diag = S::zero();
    let mut min_diag = S::infinity();
    for i in 0..k {
        let d = xtx[i * k + i].abs();
        max_diag = max_diag.max(d);
        min_diag = min_diag.min(d);
    }
    let gram_diag_ratio = if min_diag > S::zero() { max_diag / min_diag } else { S::infinity() };

    let xtx_inv = invert(&xtx, k)?;
    let mut coefficients = vec![S::zero(); k];
    matvec(&xtx_inv, k, k, &xty, &mut coefficients);

    let mut residuals = vec![S::zero(); n];
    let mut rss = S::zero();
    for r in 0..n {
        let row = &x[r * k..(r + 1) * k];
        let mut fit = S::zero();
        for i in 0..k {
            fit += row[i] * coefficients[i];
        }
        let e = y[r] - fit;
        residuals[r] = e;
        rss += e * e;
    }
    let sigma2 = rss / S::from_count(n - k);
    let standard_errors = (0..k)
        .map(|i| (sigma2 * xtx_inv[i * k + i]).abs().sqrt())
        .collect();

    Ok(OlsFit { coefficients, standard_errors, residuals, rss, sigma2, gram_diag_ratio })
}

/// `out += m · x` for a row-major `rows × cols` matrix.
pub fn matvec_add<S: Float>(m: &[S], rows: usize, cols: usize, x: &[S], out: &mut [S]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(x.len(), cols);
    debug_assert_eq!(out.len(), rows);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let mut acc = S::zero();
        for (w, v) in row.iter().zip(x.iter()) {
            acc = acc + *w * *v;
        }
        out[r] += acc;
    }
}

/// `out += mᵀ · u` for a row-major `rows × cols` matrix.
pub fn matvec_transpose_add<S: Float>(m: &[S], rows: usize, cols: usize, u: &[S], out: &mut [S]) {
    debug_assert_eq!(m.len(), rows * cols);
    debug_assert_eq!(u.len(), rows);
    debug_assert_eq!(out.len(), cols);
    for r in 0..rows {
        let row = &m[r * cols..(r + 1) * cols];
        let ur = u[r];
        for (o, w) in out.iter_mut().zip(row.iter()) {
            *o += *w * ur;
        }
    }
}

/// `acc += u ⊗ v` (outer product) into a row-major `u.len() × v.len()` slice.
pub fn outer_add<S: Float>(acc: &mut [S], u: &[S], v: &[S]) {
    debug_assert_eq!(acc.len(), u.len() * v.len());
    let cols = v.len();
    for (r, ur) in u.iter().enumerate() {
        let row = &mut acc[r * cols..(r + 1) * cols];
        for (a, vc) in row.iter_mut().zip(v.iter()) {
            *a += *ur * *vc;
        }
    }
}

/// Euclidean norm of a slice.
pub fn norm2<S: Float>(v: &[S]) -> S {
    v.iter().map(|x| *x * *x).sum::<S>().sqrt()
}
