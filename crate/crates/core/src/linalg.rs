//! Minimal dense linear algebra for small matrices.
//!
//! The crate needs dense products, a few factored transforms and a
//! nonsymmetric eigenvalue routine for matrices up to the documented dense
//! limit (n <= 128). Matrices are row-major and owned; nothing here is tuned
//! for large n.

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Scalar;

/// Iteration cap per eigenvalue before the QR sweep reports failure.
pub const MAX_QR_ITERS_PER_EIGENVALUE: usize = 40;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix is {rows}x{cols}, eigenvalues need a square matrix")]
    NotSquare { rows: usize, cols: usize },
    #[error("QR iteration failed to deflate within {0} sweeps per eigenvalue")]
    NonConvergence(usize),
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Scalar> Mat<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![S::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = S::one();
        }
        m
    }

    /// Builds from a row-major closure.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut m = Self::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// Matrix product; panics on shape mismatch (internal use only).
    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "shape mismatch in mat mul");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == S::zero() {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] = out[(i, j)] + a * other[(k, j)];
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn mul_vec(&self, v: &[S]) -> Vec<S> {
        assert_eq!(self.cols, v.len(), "shape mismatch in mat-vec");
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        Self::from_fn(self.rows, self.cols, |i, j| self[(i, j)] - other[(i, j)])
    }

    pub fn scale(&self, c: S) -> Self {
        Self::from_fn(self.rows, self.cols, |i, j| c * self[(i, j)])
    }
}

impl<S> std::ops::Index<(usize, usize)> for Mat<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.cols + j]
    }
}

impl<S> std::ops::IndexMut<(usize, usize)> for Mat<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.cols + j]
    }
}

/// All eigenvalues of a real square matrix, sorted by real part then
/// imaginary part ascending.
///
/// Householder reduction to upper Hessenberg form followed by a complex
/// single-shift QR iteration with Wilkinson shifts, 2x2 closed-form
/// deflation and exceptional shifts to break cycles.
pub fn eigenvalues<S: Scalar>(a: &Mat<S>) -> Result<Vec<Complex<S>>, EigenError> {
    if a.rows != a.cols {
        return Err(EigenError::NotSquare { rows: a.rows, cols: a.cols });
    }
    let n = a.rows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n == 1 {
        return Ok(vec![Complex::new(a[(0, 0)], S::zero())]);
    }

    let mut h = a.clone();
    hessenberg_in_place(&mut h);

    let mut hc: Vec<Complex<S>> =
        h.data.iter().map(|&x| Complex::new(x, S::zero())).collect();
    let mut eigs = qr_eigenvalues(&mut hc, n)?;
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.im.partial_cmp(&b.im).unwrap_or(std::cmp::Ordering::Equal))
    });
    Ok(eigs)
}

/// Largest eigenvalue magnitude of a real square matrix.
pub fn spectral_radius<S: Scalar>(a: &Mat<S>) -> Result<S, EigenError> {
    let eigs = eigenvalues(a)?;
    Ok(eigs
        .iter()
        .map(|z| z.norm())
        .fold(S::zero(), |acc, x| if x > acc { x } else { acc }))
}

/// Reduces to upper Hessenberg form by orthogonal similarity (Householder).
fn hessenberg_in_place<S: Scalar>(a: &mut Mat<S>) {
    let n = a.rows();
    for k in 0..n.saturating_sub(2) {
        let mut norm2 = S::zero();
        for i in k + 1..n {
            norm2 = norm2 + a[(i, k)] * a[(i, k)];
        }
        let norm = norm2.sqrt();
        if norm <= S::min_positive_value() {
            continue;
        }
        let alpha = if a[(k + 1, k)] > S::zero() { -norm } else { norm };
        let mut v = vec![S::zero(); n - k - 1];
        for i in 0..v.len() {
            v[i] = a[(k + 1 + i, k)];
        }
        v[0] = v[0] - alpha;
        let vnorm2: S = v.iter().map(|&x| x * x).sum();
        if vnorm2 <= S::min_positive_value() {
            continue;
        }
        let two = S::lit(2.0);
        // Left: A <- (I - 2vv^T/v^Tv) A on rows k+1.., all columns.
        for j in k..n {
            let mut dot = S::zero();
            for i in 0..v.len() {
                dot = dot + v[i] * a[(k + 1 + i, j)];
            }
            let coeff = two * dot / vnorm2;
            for i in 0..v.len() {
                a[(k + 1 + i, j)] = a[(k + 1 + i, j)] - coeff * v[i];
            }
        }
        // Right: A <- A (I - 2vv^T/v^Tv) on columns k+1.., all rows.
        for i in 0..n {
            let mut dot = S::zero();
            for j in 0..v.len() {
                dot = dot + a[(i, k + 1 + j)] * v[j];
            }
            let coeff = two * dot / vnorm2;
            for j in 0..v.len() {
                a[(i, k + 1 + j)] = a[(i, k + 1 + j)] - coeff * v[j];
            }
        }
        a[(k + 1, k)] = alpha;
        for i in k + 2..n {
            a[(i, k)] = S::zero();
        }
    }
}

#[inline]
fn cget<S: Copy>(h: &[Complex<S>], n: usize, i: usize, j: usize) -> Complex<S> {
    h[i * n + j]
}

#[inline]
fn cset<S>(h: &mut [Complex<S>], n: usize, i: usize, j: usize, v: Complex<S>) {
    h[i * n + j] = v;
}

/// Complex Givens rotation [[c, s], [-conj(s), c]] zeroing the second entry.
fn givens<S: Scalar>(a: Complex<S>, b: Complex<S>) -> (S, Complex<S>) {
    let bn = b.norm();
    if bn == S::zero() {
        return (S::one(), Complex::new(S::zero(), S::zero()));
    }
    let an = a.norm();
    let r = (an * an + bn * bn).sqrt();
    if an == S::zero() {
        return (S::zero(), b.conj() / bn);
    }
    let c = an / r;
    let s = (a / an) * b.conj() / r;
    (c, s)
}

/// Eigenvalues of the trailing 2x2 of the active block, closest-to-corner
/// first (Wilkinson choice).
fn trailing_eigs<S: Scalar>(
    h: &[Complex<S>],
    n: usize,
    hi: usize,
) -> (Complex<S>, Complex<S>) {
    let a = cget(h, n, hi - 1, hi - 1);
    let b = cget(h, n, hi - 1, hi);
    let c = cget(h, n, hi, hi - 1);
    let d = cget(h, n, hi, hi);
    let half = S::lit(0.5);
    let mean = (a + d) * half;
    let det = a * d - b * c;
    let disc = (mean * mean - det).sqrt();
    let mu1 = mean + disc;
    let mu2 = mean - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        (mu1, mu2)
    } else {
        (mu2, mu1)
    }
}

/// Shifted QR on a complex upper Hessenberg matrix; eigenvalue extraction
/// with deflation. `hi` below is the inclusive end of the active block.
fn qr_eigenvalues<S: Scalar>(
    h: &mut [Complex<S>],
    n: usize,
) -> Result<Vec<Complex<S>>, EigenError> {
    let eps = S::epsilon();
    let mut eigs = Vec::with_capacity(n);
    let mut hi = n - 1;
    let mut iters_here = 0usize;
    loop {
        // Negligible subdiagonal scan within the block ending at hi.
        let mut lo = 0;
        for i in (1..=hi).rev() {
            let bound = eps * (cget(h, n, i - 1, i - 1).norm() + cget(h, n, i, i).norm());
            if cget(h, n, i, i - 1).norm() <= bound {
                cset(h, n, i, i - 1, Complex::new(S::zero(), S::zero()));
                lo = i;
                break;
            }
        }

        if lo == hi {
            eigs.push(cget(h, n, hi, hi));
            if hi == 0 {
                break;
            }
            hi -= 1;
            iters_here = 0;
            continue;
        }
        if lo + 1 == hi {
            let (mu1, mu2) = trailing_eigs(h, n, hi);
            eigs.push(mu1);
            eigs.push(mu2);
            if lo == 0 {
                break;
            }
            hi = lo - 1;
            iters_here = 0;
            continue;
        }

        if iters_here >= MAX_QR_ITERS_PER_EIGENVALUE {
            return Err(EigenError::NonConvergence(MAX_QR_ITERS_PER_EIGENVALUE));
        }

        // Wilkinson shift, replaced by an exceptional magnitude-based shift
        // every tenth sweep to escape symmetric cycling.
        let shift = if iters_here > 0 && iters_here % 10 == 0 {
            let mut mag = cget(h, n, hi, hi - 1).norm();
            if hi >= 2 {
                mag = mag + cget(h, n, hi - 1, hi - 2).norm();
            }
            Complex::new(mag, S::zero())
        } else {
            trailing_eigs(h, n, hi).0
        };
        iters_here += 1;

        for d in lo..=hi {
            let v = cget(h, n, d, d) - shift;
            cset(h, n, d, d, v);
        }
        // QR by Givens sweeps: zero the subdiagonal, then multiply back on
        // the right. Restricting to the active block keeps the full spectrum
        // because the deflated parts make the matrix block triangular.
        let mut rots = Vec::with_capacity(hi - lo);
        for i in lo..hi {
            let (c, s) = givens(cget(h, n, i, i), cget(h, n, i + 1, i));
            for j in i..=hi {
                let x = cget(h, n, i, j);
                let y = cget(h, n, i + 1, j);
                cset(h, n, i, j, x * c + y * s);
                cset(h, n, i + 1, j, -x * s.conj() + y * c);
            }
            rots.push((c, s));
        }
        for (idx, (c, s)) in rots.iter().enumerate() {
            let i = lo + idx;
            let top = (i + 1).min(hi);
            for d in lo..=top {
                let x = cget(h, n, d, i);
                let y = cget(h, n, d, i + 1);
                cset(h, n, d, i, x * *c + y * s.conj());
                cset(h, n, d, i + 1, -x * *s + y * *c);
            }
        }
        for d in lo..=hi {
            let v = cget(h, n, d, d) + shift;
            cset(h, n, d, d, v);
        }
    }
    Ok(eigs)
}
