//! Dense complex linear algebra for small Hermitian positive-definite systems.
//!
//! Everything funnels through a lower Cholesky factor `L` with `M = L L†`:
//! solves, quadratic forms, log-determinants, whitening and colouring.
//! No explicit inverse is ever formed.

use std::ops::{Deref, DerefMut};
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Column vector of complex samples.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct ComplexVector(Vec<Complex64>);

impl ComplexVector {
    pub fn new(entries: Vec<Complex64>) -> Self {
        ComplexVector(entries)
    }

    pub fn zeros(n: usize) -> Self {
        ComplexVector(vec![Complex64::new(0.0, 0.0); n])
    }

    /// `n`-th elementary vector of length `len`.
    pub fn basis(len: usize, n: usize) -> Self {
        let mut v = Self::zeros(len);
        v.0[n] = Complex64::new(1.0, 0.0);
        v
    }

    pub fn from_real(values: &[f64]) -> Self {
        ComplexVector(values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.0
    }

    /// Inner product `self† · other`.
    pub fn dot(&self, other: &ComplexVector) -> Complex64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.0.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scaled(&self, c: Complex64) -> ComplexVector {
        ComplexVector(self.0.iter().map(|x| x * c).collect())
    }

    /// `self + c · other`
    pub fn add_scaled(&self, c: Complex64, other: &ComplexVector) -> ComplexVector {
        ComplexVector(
            self.0
                .iter()
                .zip(other.0.iter())
                .map(|(a, b)| a + c * b)
                .collect(),
        )
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }
}

impl Deref for ComplexVector {
    type Target = [Complex64];
    fn deref(&self) -> &[Complex64] {
        &self.0
    }
}

impl DerefMut for ComplexVector {
    fn deref_mut(&mut self) -> &mut [Complex64] {
        &mut self.0
    }
}

impl From<Vec<Complex64>> for ComplexVector {
    fn from(v: Vec<Complex64>) -> Self {
        ComplexVector(v)
    }
}

impl FromIterator<Complex64> for ComplexVector {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        ComplexVector(iter.into_iter().collect())
    }
}

/// Lower-triangular Cholesky factor, row-major.
#[derive(Clone, Debug)]
pub struct LowerTriangular {
    n: usize,
    data: Vec<Complex64>,
}

impl LowerTriangular {
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    /// `L⁻¹ b` (whitening).
    pub fn forward_solve(&self, b: &[Complex64]) -> ComplexVector {
        let n = self.n;
        let mut y = b.to_vec();
        for i in 0..n {
            let row = &self.data[i * n..i * n + i];
            let mut acc = y[i];
            for (l, yk) in row.iter().zip(&y[..i]) {
                acc -= l * yk;
            }
            y[i] = acc / self.data[i * n + i].re;
        }
        ComplexVector(y)
    }

    /// `L⁻† y`.
    pub fn backward_solve(&self, y: &[Complex64]) -> ComplexVector {
        let n = self.n;
        let mut x = y.to_vec();
        for i in (0..n).rev() {
            let mut acc = x[i];
            for (k, xk) in x.iter().enumerate().skip(i + 1) {
                acc -= self.data[k * n + i].conj() * xk;
            }
            x[i] = acc / self.data[i * n + i].re;
        }
        ComplexVector(x)
    }

    /// `L x` (colouring).
    pub fn mul_vec(&self, x: &[Complex64]) -> ComplexVector {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..=i * n + i]
                    .iter()
                    .zip(&x[..=i])
                    .map(|(l, xk)| l * xk)
                    .sum()
            })
            .collect()
    }

    pub fn log_det(&self) -> f64 {
        2.0 * (0..self.n)
            .map(|i| self.data[i * self.n + i].re.ln())
            .sum::<f64>()
    }

    /// Dense copy of `L` (upper triangle zero).
    pub fn to_dense(&self) -> Vec<Complex64> {
        self.data.clone()
    }
}

type FactorCache = OnceLock<std::result::Result<LowerTriangular, (usize, f64)>>;

/// Hermitian matrix, dense row-major, with a lazily computed Cholesky factor.
///
/// Construction averages the input with its conjugate transpose, so the
/// stored entries are conjugate-symmetric to rounding.
#[derive(Debug, Default)]
pub struct HermitianMatrix {
    n: usize,
    data: Vec<Complex64>,
    factor: FactorCache,
}

impl Clone for HermitianMatrix {
    fn clone(&self) -> Self {
        HermitianMatrix {
            n: self.n,
            data: self.data.clone(),
            factor: self.factor.clone(),
        }
    }
}

impl PartialEq for HermitianMatrix {
    fn eq(&self, other: &Self) -> bool {
        self.n == other.n && self.data == other.data
    }
}

impl HermitianMatrix {
    /// Builds from row-major entries, symmetrizing.
    pub fn from_rows(n: usize, mut data: Vec<Complex64>) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                actual: data.len(),
            });
        }
        for i in 0..n {
            data[i * n + i] = Complex64::new(data[i * n + i].re, 0.0);
            for j in 0..i {
                let avg = 0.5 * (data[i * n + j] + data[j * n + i].conj());
                data[i * n + j] = avg;
                data[j * n + i] = avg.conj();
            }
        }
        Ok(Self::from_trusted(n, data))
    }

    /// Caller guarantees `data` is already exactly Hermitian.
    fn from_trusted(n: usize, data: Vec<Complex64>) -> Self {
        HermitianMatrix {
            n,
            data,
            factor: OnceLock::new(),
        }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self::from_rows(n, data).expect("square by construction")
    }

    pub fn zeros(n: usize) -> Self {
        Self::from_trusted(n, vec![Complex64::new(0.0, 0.0); n * n])
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let n = d.len();
        let mut m = Self::zeros(n);
        for (i, &x) in d.iter().enumerate() {
            m.data[i * n + i] = Complex64::new(x, 0.0);
        }
        m
    }

    /// `Σ w_k x_k x_k†` over the given vectors with unit weights.
    pub fn outer_sum<'a>(n: usize, vectors: impl IntoIterator<Item = &'a ComplexVector>) -> Self {
        let mut data = vec![Complex64::new(0.0, 0.0); n * n];
        for x in vectors {
            accumulate_outer(&mut data, n, 1.0, x);
        }
        mirror_lower(&mut data, n);
        Self::from_trusted(n, data)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.data[i * self.n + i].re).sum()
    }

    /// Cached lower Cholesky factor.
    pub fn cholesky(&self) -> Result<&LowerTriangular> {
        self.factor
            .get_or_init(|| factorize(self.n, &self.data))
            .as_ref()
            .map_err(|&(pivot, value)| Error::NotPositiveDefinite { pivot, value })
    }

    pub fn is_positive_definite(&self) -> bool {
        self.cholesky().is_ok()
    }

    /// `M⁻¹ b`.
    pub fn solve(&self, b: &ComplexVector) -> Result<ComplexVector> {
        self.check_dim(b)?;
        let l = self.cholesky()?;
        Ok(l.backward_solve(&l.forward_solve(b)))
    }

    /// `a† M⁻¹ b`.
    pub fn quad_form(&self, a: &ComplexVector, b: &ComplexVector) -> Result<Complex64> {
        self.check_dim(a)?;
        self.check_dim(b)?;
        let l = self.cholesky()?;
        Ok(l.forward_solve(a).dot(&l.forward_solve(b)))
    }

    /// `a† M⁻¹ a`, real and nonnegative.
    pub fn quad_form_real(&self, a: &ComplexVector) -> Result<f64> {
        self.check_dim(a)?;
        Ok(self.cholesky()?.forward_solve(a).norm_sqr())
    }

    pub fn log_det(&self) -> Result<f64> {
        Ok(self.cholesky()?.log_det())
    }

    /// `M + w x x†`.
    pub fn rank_one_update(&self, w: f64, x: &ComplexVector) -> HermitianMatrix {
        assert_eq!(x.len(), self.n, "rank-one update dimension");
        let mut data = self.data.clone();
        accumulate_outer(&mut data, self.n, w, x);
        mirror_lower(&mut data, self.n);
        Self::from_trusted(self.n, data)
    }

    /// `a · self + b · other`.
    pub fn linear_combination(&self, a: f64, other: &HermitianMatrix, b: f64) -> HermitianMatrix {
        assert_eq!(self.n, other.n, "matrix dimension");
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Self::from_trusted(self.n, data)
    }

    pub fn scaled(&self, c: f64) -> HermitianMatrix {
        Self::from_trusted(self.n, self.data.iter().map(|x| x * c).collect())
    }

    pub fn mul_vec(&self, x: &ComplexVector) -> ComplexVector {
        let n = self.n;
        (0..n)
            .map(|i| {
                self.data[i * n..(i + 1) * n]
                    .iter()
                    .zip(x.iter())
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect()
    }

    /// `B M B†` for an arbitrary square `B` (row-major).
    pub fn congruence(&self, b: &[Complex64]) -> HermitianMatrix {
        let n = self.n;
        assert_eq!(b.len(), n * n, "congruence dimension");
        let mut bm = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in 0..n {
                let bik = b[i * n + k];
                for j in 0..n {
                    bm[i * n + j] += bik * self.data[k * n + j];
                }
            }
        }
        let mut out = vec![Complex64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| bm[i * n + k] * b[j * n + k].conj()).sum();
            }
        }
        Self::from_rows(n, out).expect("square by construction")
    }

    fn check_dim(&self, v: &ComplexVector) -> Result<()> {
        if v.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                actual: v.len(),
            });
        }
        Ok(())
    }
}

/// Adds `w x x†` into the lower triangle (incl. diagonal) of `data`.
#[inline]
fn accumulate_outer(data: &mut [Complex64], n: usize, w: f64, x: &[Complex64]) {
    if w == 0.0 {
        return;
    }
    for i in 0..n {
        let wxi = x[i] * w;
        let row = &mut data[i * n..i * n + i + 1];
        for (d, xj) in row.iter_mut().zip(&x[..=i]) {
            *d += wxi * xj.conj();
        }
    }
}

/// Overwrites the strict upper triangle with the conjugate of the lower one.
#[inline]
fn mirror_lower(data: &mut [Complex64], n: usize) {
    for i in 0..n {
        data[i * n + i].im = 0.0;
        for j in 0..i {
            data[j * n + i] = data[i * n + j].conj();
        }
    }
}

fn factorize(n: usize, a: &[Complex64]) -> std::result::Result<LowerTriangular, (usize, f64)> {
    let mut l = vec![Complex64::new(0.0, 0.0); n * n];
    for j in 0..n {
        let ajj = a[j * n + j].re;
        let d = ajj
            - l[j * n..j * n + j]
                .iter()
                .map(|x| x.norm_sqr())
                .sum::<f64>();
        // A pivot at rounding level relative to the original diagonal means
        // the matrix is numerically singular.
        if !d.is_finite() || d <= (n as f64) * f64::EPSILON * ajj.abs() || d <= 0.0 {
            return Err((j, d));
        }
        let ljj = d.sqrt();
        l[j * n + j] = Complex64::new(ljj, 0.0);
        for i in j + 1..n {
            let mut acc = a[i * n + j];
            for k in 0..j {
                acc -= l[i * n + k] * l[j * n + k].conj();
            }
            l[i * n + j] = acc / ljj;
        }
    }
    Ok(LowerTriangular { n, data: l })
}
