//! Dense assembly and pivoted LU, used as reference oracles and as the
//! direct-solver baseline.

use num_traits::Float;
use rayon::prelude::*;

use crate::error::{OsfdeError, Result};
use crate::kernel::{wsgd_weights, FractionalOrder};
use crate::Scalar;

/// Largest number of unknowns accepted by dense assembly.
pub const DENSE_LIMIT: usize = 4096;

/// Row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> DenseMatrix<T> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![T::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: T) {
        self.data[i * self.n + j] = v;
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        self.data
            .par_chunks(self.n.max(1))
            .map(|row| row.iter().zip(x).fold(T::zero(), |s, (&a, &b)| s + a * b))
            .collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        out.data.par_chunks_mut(n.max(1)).enumerate().for_each(|(i, row)| {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a != T::zero() {
                    for (r, &b) in row.iter_mut().zip(&other.data[k * n..(k + 1) * n]) {
                        *r = *r + a * b;
                    }
                }
            }
        });
        out
    }

    /// Left-multiplies by `diag(d)`.
    pub fn scale_rows(&mut self, d: &[T]) {
        let n = self.n;
        for (row, &di) in self.data.chunks_mut(n.max(1)).zip(d) {
            row.iter_mut().for_each(|v| *v = *v * di);
        }
    }

    pub fn add_scaled(&mut self, s: T, other: &Self) {
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + s * b;
        }
    }
}

fn guard(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(OsfdeError::SizeGuard {
            size: n,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

pub fn dense_galpha<T: Scalar>(alpha: FractionalOrder, m: usize) -> Result<DenseMatrix<T>> {
    guard(m)?;
    let w = wsgd_weights::<T>(alpha, m);
    let w = w.w();
    Ok(DenseMatrix::from_fn(m, |i, j| {
        if j <= i + 1 {
            w[i + 1 - j]
        } else {
            T::zero()
        }
    }))
}

/// `I - eta diag(d) G_alpha`.
pub fn dense_assemble_1d<T: Scalar>(alpha: FractionalOrder, d: &[T], eta: T) -> Result<DenseMatrix<T>> {
    let mut g = dense_galpha::<T>(alpha, d.len())?;
    g.scale_rows(d);
    let mut a = DenseMatrix::identity(d.len());
    a.add_scaled(-eta, &g);
    Ok(a)
}

/// Kronecker product `A (x) B`.
pub fn kron<T: Scalar>(a: &DenseMatrix<T>, b: &DenseMatrix<T>) -> Result<DenseMatrix<T>> {
    let (na, nb) = (a.dim(), b.dim());
    guard(na * nb)?;
    Ok(DenseMatrix::from_fn(na * nb, |r, c| {
        a.get(r / nb, c / nb) * b.get(r % nb, c % nb)
    }))
}

/// `I - eta_x D (I (x) G_alpha) - eta_y E (G_beta (x) I)` in y-major ordering
/// (`k = j m1 + i`).
#[allow(clippy::too_many_arguments)]
pub fn dense_assemble_2d<T: Scalar>(
    alpha: FractionalOrder,
    beta: FractionalOrder,
    m1: usize,
    m2: usize,
    d: &[T],
    e: &[T],
    eta_x: T,
    eta_y: T,
) -> Result<DenseMatrix<T>> {
    let n = m1 * m2;
    guard(n)?;
    if d.len() != n || e.len() != n {
        return Err(OsfdeError::DimensionMismatch {
            expected: n,
            found: d.len().min(e.len()),
        });
    }
    let mut bx = kron(&DenseMatrix::identity(m2), &dense_galpha::<T>(alpha, m1)?)?;
    bx.scale_rows(d);
    let mut by = kron(&dense_galpha::<T>(beta, m2)?, &DenseMatrix::identity(m1))?;
    by.scale_rows(e);
    let mut a = DenseMatrix::identity(n);
    a.add_scaled(-eta_x, &bx);
    a.add_scaled(-eta_y, &by);
    Ok(a)
}

/// `P A = L U` with partial pivoting, stored in place.
#[derive(Debug, Clone)]
pub struct LuFactors<T> {
    lu: DenseMatrix<T>,
    perm: Vec<usize>,
}

impl<T: Scalar> LuFactors<T> {
    pub fn factor(mut a: DenseMatrix<T>) -> Result<Self> {
        let n = a.n;
        let mut perm: Vec<usize> = (0..n).collect();
        let scale = a.data.iter().fold(T::zero(), |s, &v| Float::max(s, Float::abs(v)));
        let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
        for c in 0..n {
            let (p, pv) = (c..n)
                .map(|r| (r, Float::abs(a.data[r * n + c])))
                .fold((c, T::zero()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(pv > tiny) {
                return Err(OsfdeError::Singular { column: c });
            }
            if p != c {
                for j in 0..n {
                    a.data.swap(c * n + j, p * n + j);
                }
                perm.swap(c, p);
            }
            let (top, bottom) = a.data.split_at_mut((c + 1) * n);
            let pivot_row = &top[c * n..];
            let piv = pivot_row[c];
            bottom.par_chunks_mut(n).for_each(|row| {
                let l = row[c] / piv;
                if l != T::zero() {
                    row[c] = l;
                    for (r, &u) in row[c + 1..].iter_mut().zip(&pivot_row[c + 1..]) {
                        *r = *r - l * u;
                    }
                }
            });
        }
        Ok(Self { lu: a, perm })
    }

    pub fn dim(&self) -> usize {
        self.lu.n
    }

    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let n = self.lu.n;
        assert_eq!(b.len(), n);
        let mut x: Vec<T> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = self.lu.row(i);
            let s = row[..i].iter().zip(&x[..i]).fold(T::zero(), |s, (&l, &v)| s + l * v);
            x[i] = x[i] - s;
        }
        for i in (0..n).rev() {
            let row = self.lu.row(i);
            let s = row[i + 1..].iter().zip(&x[i + 1..]).fold(T::zero(), |s, (&u, &v)| s + u * v);
            x[i] = (x[i] - s) / row[i];
        }
        x
    }
}

pub fn plu_solve<T: Scalar>(a: &DenseMatrix<T>, b: &[T]) -> Result<Vec<T>> {
    Ok(LuFactors::factor(a.clone())?.solve(b))
}
