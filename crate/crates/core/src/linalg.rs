//! Dense row-major linear algebra used by the kernel machinery.
//!
//! Only what the crate needs: a small matrix type, a cache-blocked Cholesky
//! factorization with a diagonal-jitter ladder, Householder least squares and
//! a cyclic Jacobi eigensolver for small symmetric matrices.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::ops::{Index, IndexMut};

use crate::error::Error;

/// Row-major dense matrix of `f64`.
#[derive(Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Wraps a row-major buffer. Panics if the length does not match.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "buffer length does not match shape");
        Matrix { rows, cols, data }
    }

    /// Single column matrix.
    pub fn column(values: &[f64]) -> Self {
        Matrix::from_row_major(values.len(), 1, values.to_vec())
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, values: &[f64]) {
        assert_eq!(values.len(), self.rows);
        for (i, v) in values.iter().enumerate() {
            self[(i, j)] = *v;
        }
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.cols, rhs.rows, "inner dimensions differ");
        let mut out = Matrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            let out_row = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(rhs.row(k)) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `selfᵀ x` without forming the transpose.
    pub fn tr_matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, x.len());
        let mut out = vec![0.0; self.cols];
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, self.row(i), &mut out);
        }
        out
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += shift;
        }
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|v| *v *= s);
    }

    pub fn sub(&self, rhs: &Matrix) -> Matrix {
        assert_eq!(self.shape(), rhs.shape());
        let data = self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect();
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_symmetric(&self) -> bool {
        self.rows == self.cols
            && (0..self.rows).all(|i| (0..i).all(|j| self[(i, j)] == self[(j, i)]))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl fmt::Debug for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Matrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            writeln!(f, "  {:?}", &self.row(i)[..self.cols.min(8)])?;
        }
        write!(f, "]")
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let mut ca = a.chunks_exact(4);
    let mut cb = b.chunks_exact(4);
    for (x, y) in (&mut ca).zip(&mut cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[inline]
pub fn norm(x: &[f64]) -> f64 {
    libm::sqrt(dot(x, x))
}

#[inline]
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(squared_distance(a, b))
}

#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Diagonal shifts tried, in order, before a factorization is declared failed.
pub const JITTER_LADDER: [f64; 4] = [0.0, 1e-14, 1e-12, 1e-10];

const BLOCK: usize = 48;

/// Lower-triangular Cholesky factor `L` with `A + jitter·I = L Lᵀ`.
#[derive(Clone)]
pub struct Cholesky {
    n: usize,
    // Row-major, only the lower triangle is meaningful.
    l: Vec<f64>,
    jitter: f64,
}

impl Cholesky {
    /// Factors a symmetric positive-definite matrix, escalating the diagonal
    /// jitter along [`JITTER_LADDER`] on breakdown.
    pub fn factor(a: &Matrix) -> Result<Self, Error> {
        Self::factor_with_ladder(a, &JITTER_LADDER)
    }

    pub fn factor_with_ladder(a: &Matrix, ladder: &[f64]) -> Result<Self, Error> {
        if a.rows() != a.cols() {
            return Err(Error::DimensionMismatch { expected: a.rows(), found: a.cols() });
        }
        let n = a.rows();
        let mut last_pivot = 0;
        for &jitter in ladder {
            let mut l = a.as_slice().to_vec();
            if jitter != 0.0 {
                for i in 0..n {
                    l[i * n + i] += jitter;
                }
            }
            match factor_in_place(&mut l, n) {
                Ok(()) => return Ok(Cholesky { n, l, jitter }),
                Err(pivot) => last_pivot = pivot,
            }
        }
        Err(Error::NotPositiveDefinite {
            pivot: last_pivot,
            jitter: ladder.last().copied().unwrap_or(0.0),
            condition_estimate: diagonal_condition_estimate(a),
        })
    }

    /// Rebuilds a factor from a stored lower triangle (row-major, `n×n`).
    pub fn from_lower(n: usize, l: Vec<f64>, jitter: f64) -> Self {
        assert_eq!(l.len(), n * n);
        Cholesky { n, l, jitter }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    /// Diagonal shift that was needed for the factorization to succeed.
    #[inline]
    pub fn jitter(&self) -> f64 {
        self.jitter
    }

    #[inline]
    fn lrow(&self, i: usize) -> &[f64] {
        &self.l[i * self.n..i * self.n + i + 1]
    }

    /// The factor as a dense matrix with a zeroed upper triangle.
    pub fn lower(&self) -> Matrix {
        Matrix::from_fn(self.n, self.n, |i, j| if j <= i { self.l[i * self.n + j] } else { 0.0 })
    }

    /// Solves `L y = b` in place.
    pub fn forward_substitute(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in 0..self.n {
            let row = self.lrow(i);
            let s = b[i] - dot(&row[..i], &b[..i]);
            b[i] = s / row[i];
        }
    }

    /// Solves `Lᵀ x = y` in place.
    pub fn backward_substitute(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        for i in (0..self.n).rev() {
            let row = self.lrow(i);
            b[i] /= row[i];
            let xi = b[i];
            axpy(-xi, &row[..i], &mut b[..i]);
        }
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        self.forward_substitute(b);
        self.backward_substitute(b);
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    /// Solves for every column of `b`.
    pub fn solve(&self, b: &Matrix) -> Matrix {
        assert_eq!(b.rows(), self.n);
        let mut out = Matrix::zeros(b.rows(), b.cols());
        let mut col = vec![0.0; self.n];
        for j in 0..b.cols() {
            for (i, c) in col.iter_mut().enumerate() {
                *c = b[(i, j)];
            }
            self.solve_in_place(&mut col);
            out.set_col(j, &col);
        }
        out
    }

    /// `bᵀ A⁻¹ b` computed as `‖L⁻¹ b‖²`, which is nonnegative by construction.
    pub fn inverse_quadratic_form(&self, b: &[f64]) -> f64 {
        let mut y = b.to_vec();
        self.forward_substitute(&mut y);
        dot(&y, &y)
    }

    /// Explicit inverse; only sensible for small systems.
    pub fn inverse(&self) -> Matrix {
        self.solve(&Matrix::identity(self.n))
    }

    pub fn log_determinant(&self) -> f64 {
        (0..self.n).map(|i| 2.0 * libm::log(self.l[i * self.n + i])).sum()
    }
}

impl fmt::Debug for Cholesky {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Cholesky").field("n", &self.n).field("jitter", &self.jitter).finish()
    }
}

/// Cache-blocked row-oriented Cholesky–Banachiewicz. On failure returns the
/// index of the first non-positive pivot.
fn factor_in_place(a: &mut [f64], n: usize) -> Result<(), usize> {
    let mut i0 = 0;
    while i0 < n {
        let i1 = (i0 + BLOCK).min(n);
        // Columns left of the block: each earlier row is streamed once per block.
        for j in 0..i0 {
            let (head, tail) = a.split_at_mut(i0 * n);
            let lj = &head[j * n..j * n + j + 1];
            let djj = lj[j];
            let mut i = i0;
            while i + 4 <= i1 {
                let base = (i - i0) * n;
                let (r0, rest) = tail[base..].split_at_mut(n);
                let (r1, rest) = rest.split_at_mut(n);
                let (r2, rest) = rest.split_at_mut(n);
                let r3 = &mut rest[..n];
                let s = dot4(&lj[..j], &r0[..j], &r1[..j], &r2[..j], &r3[..j]);
                r0[j] = (r0[j] - s[0]) / djj;
                r1[j] = (r1[j] - s[1]) / djj;
                r2[j] = (r2[j] - s[2]) / djj;
                r3[j] = (r3[j] - s[3]) / djj;
                i += 4;
            }
            while i < i1 {
                let base = (i - i0) * n;
                let r = &mut tail[base..base + n];
                let s = dot(&lj[..j], &r[..j]);
                r[j] = (r[j] - s) / djj;
                i += 1;
            }
        }
        // Diagonal block.
        for i in i0..i1 {
            for j in i0..=i {
                let (head, tail) = a.split_at_mut(i * n);
                let ri = &mut tail[..n];
                if j == i {
                    let s = ri[i] - dot(&ri[..i], &ri[..i]);
                    if !(s > 0.0) || !s.is_finite() {
                        return Err(i);
                    }
                    ri[i] = libm::sqrt(s);
                } else {
                    let lj = &head[j * n..j * n + j + 1];
                    let s = dot(&lj[..j], &ri[..j]);
                    ri[j] = (ri[j] - s) / lj[j];
                }
            }
        }
        i0 = i1;
    }
    Ok(())
}

#[inline]
fn dot4(x: &[f64], a: &[f64], b: &[f64], c: &[f64], d: &[f64]) -> [f64; 4] {
    let len = x.len();
    let (a, b, c, d) = (&a[..len], &b[..len], &c[..len], &d[..len]);
    let mut s0 = [0.0f64; 2];
    let mut s1 = [0.0f64; 2];
    let mut s2 = [0.0f64; 2];
    let mut s3 = [0.0f64; 2];
    let pairs = len / 2;
    for p in 0..pairs {
        let k = 2 * p;
        let (x0, x1) = (x[k], x[k + 1]);
        s0[0] += x0 * a[k];
        s0[1] += x1 * a[k + 1];
        s1[0] += x0 * b[k];
        s1[1] += x1 * b[k + 1];
        s2[0] += x0 * c[k];
        s2[1] += x1 * c[k + 1];
        s3[0] += x0 * d[k];
        s3[1] += x1 * d[k + 1];
    }
    let mut out = [s0[0] + s0[1], s1[0] + s1[1], s2[0] + s2[1], s3[0] + s3[1]];
    if len % 2 == 1 {
        let k = len - 1;
        out[0] += x[k] * a[k];
        out[1] += x[k] * b[k];
        out[2] += x[k] * c[k];
        out[3] += x[k] * d[k];
    }
    out
}

/// Ratio of largest to smallest diagonal entry; a crude but cheap indicator
/// reported alongside factorization failures.
fn diagonal_condition_estimate(a: &Matrix) -> f64 {
    let n = a.rows().min(a.cols());
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for i in 0..n {
        let v = a[(i, i)].abs();
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > 0.0 {
        hi / lo
    } else {
        f64::INFINITY
    }
}

/// Minimum-norm least-squares solution of `A X ≈ B` for a tall matrix `A`
/// (rows ≥ cols) via Householder QR. Returns `None` when `A` is numerically
/// rank deficient.
pub fn least_squares(a: &Matrix, b: &Matrix) -> Option<Matrix> {
    let (m, n) = a.shape();
    assert!(m >= n, "least_squares expects a tall system");
    assert_eq!(b.rows(), m);
    let mut r = a.clone();
    let mut qtb = b.clone();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let mut alpha = 0.0;
        for i in k..m {
            alpha += r[(i, k)] * r[(i, k)];
        }
        let alpha = libm::sqrt(alpha);
        if alpha <= 1e-13 * scale {
            return None;
        }
        let sign = if r[(k, k)] >= 0.0 { 1.0 } else { -1.0 };
        let mut v: Vec<f64> = (k..m).map(|i| r[(i, k)]).collect();
        v[0] += sign * alpha;
        let vnorm2 = dot(&v, &v);
        if vnorm2 == 0.0 {
            continue;
        }
        for j in k..n {
            let s: f64 = (k..m).map(|i| v[i - k] * r[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..m {
                r[(i, j)] -= s * v[i - k];
            }
        }
        for j in 0..qtb.cols() {
            let s: f64 = (k..m).map(|i| v[i - k] * qtb[(i, j)]).sum::<f64>() * 2.0 / vnorm2;
            for i in k..m {
                qtb[(i, j)] -= s * v[i - k];
            }
        }
    }
    let mut x = Matrix::zeros(n, b.cols());
    for j in 0..b.cols() {
        for i in (0..n).rev() {
            let mut s = qtb[(i, j)];
            for c in i + 1..n {
                s -= r[(i, c)] * x[(c, j)];
            }
            x[(i, j)] = s / r[(i, i)];
        }
    }
    Some(x)
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
/// Intended for small matrices (a few hundred rows at most).
pub fn symmetric_eigenvalues(a: &Matrix) -> Vec<f64> {
    assert_eq!(a.rows(), a.cols());
    let n = a.rows();
    let mut m = a.clone();
    for _sweep in 0..100 {
        let mut off = 0.0;
        for i in 0..n {
            for j in 0..i {
                off += m[(i, j)] * m[(i, j)];
            }
        }
        let diag: f64 = (0..n).map(|i| m[(i, i)] * m[(i, i)]).sum();
        if off <= 1e-30 * diag.max(f64::MIN_POSITIVE) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (m[(q, q)] - m[(p, p)]) / (2.0 * apq);
                let t = libm::copysign(1.0, theta) / (theta.abs() + libm::sqrt(theta * theta + 1.0));
                let c = 1.0 / libm::sqrt(t * t + 1.0);
                let s = t * c;
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = c * mkp - s * mkq;
                    m[(k, q)] = s * mkp + c * mkq;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = c * mpk - s * mqk;
                    m[(q, k)] = s * mpk + c * mqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| m[(i, i)]).collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

/// Smallest eigenvalue of a symmetric positive-definite matrix given its
/// Cholesky factor, by inverse power iteration.
pub fn smallest_eigenvalue_spd(factor: &Cholesky, max_iter: usize, tol: f64) -> f64 {
    let n = factor.dim();
    if n == 0 {
        return f64::INFINITY;
    }
    // Deterministic, non-degenerate start vector.
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 97) as f64 / 97.0).collect();
    let nv = norm(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut mu = 0.0;
    for _ in 0..max_iter {
        let w = factor.solve_vec(&v);
        mu = dot(&v, &w);
        let nw = norm(&w);
        // Residual of the eigen-equation for K⁻¹ relative to its magnitude.
        let resid = libm::sqrt(w.iter().zip(&v).map(|(a, b)| (a - mu * b) * (a - mu * b)).sum::<f64>());
        v = w.into_iter().map(|x| x / nw).collect();
        if resid <= tol * nw {
            break;
        }
    }
    1.0 / mu
}
