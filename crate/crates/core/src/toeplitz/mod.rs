//! Structured matrices applied through FFTs.
//!
//! * [`ToeplitzOperator`]: embedded in a `2m` circulant.
//! * [`CirculantOperator`]: diagonalised by the DFT.
//! * [`SkewCirculantOperator`]: diagonalised by the DFT after the twiddle
//!   `x_j -> e^{i pi j / m} x_j`.
//!
//! All operators are immutable once built; each product allocates its own
//! scratch so they can be shared freely between threads.

mod gs;
mod solve;

use std::fmt;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::Float;
use rustfft::{Fft, FftPlanner};

use crate::error::{OsfdeError, Result};
use crate::krylov::LinearOperator;
use crate::Scalar;

pub use gs::{gs_apply, gs_build, gs_build_with, GsInverse};
pub use solve::{strang_circulant, toeplitz_solve, StrangPreconditioner};

#[derive(Clone)]
struct FftPair<T> {
    forward: Arc<dyn Fft<T>>,
    inverse: Arc<dyn Fft<T>>,
}

impl<T: Scalar> FftPair<T> {
    fn new(len: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            forward: planner.plan_fft_forward(len),
            inverse: planner.plan_fft_inverse(len),
        }
    }

    fn len(&self) -> usize {
        self.forward.len()
    }

    /// `ifft(eig .* fft(buf)) / len`, in place.
    fn convolve(&self, eig: &[Complex<T>], buf: &mut [Complex<T>]) {
        self.forward.process(buf);
        for (b, &e) in buf.iter_mut().zip(eig) {
            *b = *b * e;
        }
        self.inverse.process(buf);
        let scale = T::one() / T::from_usize_lossy(self.len());
        for b in buf.iter_mut() {
            *b = b.scale(scale);
        }
    }

    fn spectrum(&self, col: &[T]) -> Vec<Complex<T>> {
        let mut buf: Vec<Complex<T>> = col.iter().map(|&c| Complex::new(c, T::zero())).collect();
        self.forward.process(&mut buf);
        buf
    }
}

// Real inputs through complex transforms should come back real up to rounding.
#[inline]
fn check_real<T: Scalar>(buf: &[Complex<T>]) {
    if cfg!(debug_assertions) {
        let scale = buf.iter().fold(T::one(), |m, c| Float::max(m, c.norm()));
        let worst = buf.iter().fold(T::zero(), |m, c| Float::max(m, Float::abs(c.im)));
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(1e4)) * scale;
        debug_assert!(worst <= tol, "imaginary residue {worst:e} after inverse FFT");
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(OsfdeError::DimensionMismatch { expected, found })
    }
}

/// Dense `m x m` Toeplitz matrix `T[i][j] = col[i - j]` (`i >= j`),
/// `row[j - i]` (`j > i`).
#[derive(Clone)]
pub struct ToeplitzOperator<T> {
    first_col: Vec<T>,
    first_row: Vec<T>,
    fft: FftPair<T>,
    eig: Vec<Complex<T>>,
}

impl<T: Scalar> ToeplitzOperator<T> {
    pub fn new(first_col: Vec<T>, first_row: Vec<T>) -> Result<Self> {
        let m = first_col.len();
        if m == 0 {
            return Err(OsfdeError::InvalidGrid("empty Toeplitz operator".into()));
        }
        check_len(m, first_row.len())?;
        if first_col[0] != first_row[0] {
            return Err(OsfdeError::InvalidGrid(
                "first_row[0] must equal first_col[0]".into(),
            ));
        }
        let mut embed = vec![T::zero(); 2 * m];
        embed[..m].copy_from_slice(&first_col);
        for j in 1..m {
            embed[2 * m - j] = first_row[j];
        }
        let fft = FftPair::new(2 * m);
        let eig = fft.spectrum(&embed);
        Ok(Self {
            first_col,
            first_row,
            fft,
            eig,
        })
    }

    pub fn identity(m: usize) -> Self {
        let mut e = vec![T::zero(); m.max(1)];
        e[0] = T::one();
        Self::new(e.clone(), e).expect("identity is well formed")
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[T] {
        &self.first_col
    }

    pub fn first_row(&self) -> &[T] {
        &self.first_row
    }

    /// Entry `(i, j)`.
    pub fn entry(&self, i: usize, j: usize) -> T {
        if i >= j {
            self.first_col[i - j]
        } else {
            self.first_row[j - i]
        }
    }

    /// `a * I + b * self`.
    pub fn affine(&self, a: T, b: T) -> Self {
        let mut col: Vec<T> = self.first_col.iter().map(|&c| b * c).collect();
        let mut row: Vec<T> = self.first_row.iter().map(|&c| b * c).collect();
        col[0] = col[0] + a;
        row[0] = col[0];
        Self::new(col, row).expect("same shape")
    }

    pub fn transpose(&self) -> Self {
        Self::new(self.first_row.clone(), self.first_col.clone()).expect("same shape")
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![T::zero(); self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    /// `y <- T x`. Panics on length mismatch.
    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        let m = self.dim();
        assert_eq!(x.len(), m);
        assert_eq!(y.len(), m);
        let mut buf = vec![Complex::new(T::zero(), T::zero()); 2 * m];
        for (b, &v) in buf.iter_mut().zip(x) {
            b.re = v;
        }
        self.fft.convolve(&self.eig, &mut buf);
        check_real(&buf[..m]);
        for (yi, b) in y.iter_mut().zip(&buf) {
            *yi = b.re;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<T>> {
        let m = self.dim();
        (0..m).map(|i| (0..m).map(|j| self.entry(i, j)).collect()).collect()
    }
}

impl<T: Scalar> LinearOperator<T> for ToeplitzOperator<T> {
    fn dim(&self) -> usize {
        ToeplitzOperator::dim(self)
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_into(x, y)
    }
}

impl<T: fmt::Debug> fmt::Debug for ToeplitzOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ToeplitzOperator")
            .field("m", &self.first_col.len())
            .field("first_col", &self.first_col)
            .field("first_row", &self.first_row)
            .finish()
    }
}

/// Circulant matrix defined by its first column; `C[i][j] = c[(i - j) mod m]`.
#[derive(Clone)]
pub struct CirculantOperator<T> {
    first_col: Vec<T>,
    fft: FftPair<T>,
    eig: Vec<Complex<T>>,
}

impl<T: Scalar> CirculantOperator<T> {
    pub fn new(first_col: Vec<T>) -> Result<Self> {
        if first_col.is_empty() {
            return Err(OsfdeError::InvalidGrid("empty circulant operator".into()));
        }
        let fft = FftPair::new(first_col.len());
        let eig = fft.spectrum(&first_col);
        Ok(Self {
            first_col,
            fft,
            eig,
        })
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[T] {
        &self.first_col
    }

    /// Eigenvalues in DFT order.
    pub fn eigenvalues(&self) -> &[Complex<T>] {
        &self.eig
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        let m = self.dim();
        self.first_col[(i + m - j) % m]
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![T::zero(); self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let mut buf: Vec<Complex<T>> = x.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.convolve(&self.eig, &mut buf);
        check_real(&buf);
        for (yi, b) in y.iter_mut().zip(&buf) {
            *yi = b.re;
        }
    }

    /// Solves `C x = b` by dividing in Fourier space.
    pub fn solve_into(&self, b: &[T], x: &mut [T]) {
        assert_eq!(b.len(), self.dim());
        let inv: Vec<Complex<T>> = self.eig.iter().map(|e| e.inv()).collect();
        let mut buf: Vec<Complex<T>> = b.iter().map(|&v| Complex::new(v, T::zero())).collect();
        self.fft.convolve(&inv, &mut buf);
        for (xi, c) in x.iter_mut().zip(&buf) {
            *xi = c.re;
        }
    }
}

impl<T: Scalar> LinearOperator<T> for CirculantOperator<T> {
    fn dim(&self) -> usize {
        CirculantOperator::dim(self)
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_into(x, y)
    }
}

impl<T: fmt::Debug> fmt::Debug for CirculantOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CirculantOperator")
            .field("first_col", &self.first_col)
            .finish()
    }
}

/// Skew-circulant matrix: like a circulant but the wrapped entries above the
/// diagonal change sign, `S[i][j] = -s[m + i - j]` for `i < j`.
#[derive(Clone)]
pub struct SkewCirculantOperator<T> {
    first_col: Vec<T>,
    fft: FftPair<T>,
    twiddle: Vec<Complex<T>>,
    eig: Vec<Complex<T>>,
}

impl<T: Scalar> SkewCirculantOperator<T> {
    pub fn new(first_col: Vec<T>) -> Result<Self> {
        let m = first_col.len();
        if m == 0 {
            return Err(OsfdeError::InvalidGrid("empty skew-circulant operator".into()));
        }
        let pi = T::lit(std::f64::consts::PI);
        let twiddle: Vec<Complex<T>> = (0..m)
            .map(|j| Complex::from_polar(T::one(), pi * T::from_usize_lossy(j) / T::from_usize_lossy(m)))
            .collect();
        let fft = FftPair::new(m);
        let mut buf: Vec<Complex<T>> = first_col
            .iter()
            .zip(&twiddle)
            .map(|(&s, &w)| w.scale(s))
            .collect();
        fft.forward.process(&mut buf);
        Ok(Self {
            first_col,
            fft,
            twiddle,
            eig: buf,
        })
    }

    pub fn dim(&self) -> usize {
        self.first_col.len()
    }

    pub fn first_col(&self) -> &[T] {
        &self.first_col
    }

    pub fn entry(&self, i: usize, j: usize) -> T {
        let m = self.dim();
        if i >= j {
            self.first_col[i - j]
        } else {
            -self.first_col[m + i - j]
        }
    }

    pub fn matvec(&self, x: &[T]) -> Result<Vec<T>> {
        check_len(self.dim(), x.len())?;
        let mut y = vec![T::zero(); self.dim()];
        self.apply_into(x, &mut y);
        Ok(y)
    }

    pub fn apply_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        let mut buf: Vec<Complex<T>> = x.iter().zip(&self.twiddle).map(|(&v, &w)| w.scale(v)).collect();
        self.fft.convolve(&self.eig, &mut buf);
        for (b, w) in buf.iter_mut().zip(&self.twiddle) {
            *b = *b * w.conj();
        }
        check_real(&buf);
        for (yi, b) in y.iter_mut().zip(&buf) {
            *yi = b.re;
        }
    }
}

impl<T: Scalar> LinearOperator<T> for SkewCirculantOperator<T> {
    fn dim(&self) -> usize {
        SkewCirculantOperator::dim(self)
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_into(x, y)
    }
}

impl<T: fmt::Debug> fmt::Debug for SkewCirculantOperator<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SkewCirculantOperator")
            .field("first_col", &self.first_col)
            .finish()
    }
}
