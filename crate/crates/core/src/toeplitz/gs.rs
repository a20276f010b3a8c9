//! Gohberg–Semencul representation of a Toeplitz inverse.
//!
//! With `P v = e_1` and `P v~ = e_m`,
//!
//! ```text
//! P^-1 = (S1 C1 - S2 C2) / (2 v_1)
//! ```
//!
//! where `S1`, `S2` are skew-circulant with first columns `v` and
//! `(-v~_m, v~_1, .., v~_{m-1})`, and `C1`, `C2` are circulant with first
//! columns `(v~_m, v~_1, .., v~_{m-1})` and `v`. Each application costs four
//! FFT-based products.

use super::{toeplitz_solve, CirculantOperator, SkewCirculantOperator, ToeplitzOperator};
use crate::error::{OsfdeError, Result};
use crate::krylov::LinearOperator;
use crate::Scalar;

/// Iteration budget for the two setup solves.
const SETUP_MAX_ITER: usize = 500;

#[derive(Clone, Debug)]
pub struct GsInverse<T> {
    v: Vec<T>,
    v_tilde: Vec<T>,
    v1: T,
    s1: SkewCirculantOperator<T>,
    c1: CirculantOperator<T>,
    s2: SkewCirculantOperator<T>,
    c2: CirculantOperator<T>,
}

impl<T: Scalar> GsInverse<T> {
    /// Builds the representation from the two inverse columns.
    pub fn from_columns(v: Vec<T>, v_tilde: Vec<T>) -> Result<Self> {
        let m = v.len();
        if m == 0 || v_tilde.len() != m {
            return Err(OsfdeError::DimensionMismatch {
                expected: m,
                found: v_tilde.len(),
            });
        }
        let v1 = v[0];
        if !(v1 > T::zero()) {
            return Err(OsfdeError::NonPositivePivot(v1.as_f64()));
        }
        let rotated = |sign: T| {
            let mut out = Vec::with_capacity(m);
            out.push(sign * v_tilde[m - 1]);
            out.extend_from_slice(&v_tilde[..m - 1]);
            out
        };
        let v_bar = rotated(-T::one());
        let v_hat = rotated(T::one());
        Ok(Self {
            s1: SkewCirculantOperator::new(v.clone())?,
            c1: CirculantOperator::new(v_hat)?,
            s2: SkewCirculantOperator::new(v_bar)?,
            c2: CirculantOperator::new(v.clone())?,
            v,
            v_tilde,
            v1,
        })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// First column of `P^-1`.
    pub fn v(&self) -> &[T] {
        &self.v
    }

    /// Last column of `P^-1`.
    pub fn v_tilde(&self) -> &[T] {
        &self.v_tilde
    }

    pub fn v1(&self) -> T {
        self.v1
    }

    pub fn apply(&self, y: &[T]) -> Result<Vec<T>> {
        if y.len() != self.dim() {
            return Err(OsfdeError::DimensionMismatch {
                expected: self.dim(),
                found: y.len(),
            });
        }
        let mut out = vec![T::zero(); self.dim()];
        self.apply_into(y, &mut out);
        Ok(out)
    }

    pub fn apply_into(&self, y: &[T], out: &mut [T]) {
        let m = self.dim();
        assert_eq!(y.len(), m);
        assert_eq!(out.len(), m);
        let mut t = vec![T::zero(); m];
        let mut u = vec![T::zero(); m];
        self.c1.apply_into(y, &mut t);
        self.s1.apply_into(&t, out);
        self.c2.apply_into(y, &mut t);
        self.s2.apply_into(&t, &mut u);
        let scale = T::one() / (self.v1 + self.v1);
        for (o, &b) in out.iter_mut().zip(&u) {
            *o = (*o - b) * scale;
        }
    }
}

impl<T: Scalar> LinearOperator<T> for GsInverse<T> {
    fn dim(&self) -> usize {
        GsInverse::dim(self)
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_into(x, y)
    }
}

/// Solves `P v = e_1`, `P v~ = e_m` to relative residual `tol` and builds the
/// inverse representation.
///
/// `P` must have a positive definite symmetric part; otherwise `v_1` may come
/// out non-positive and [`OsfdeError::NonPositivePivot`] is returned.
pub fn gs_build<T: Scalar>(p: &ToeplitzOperator<T>, tol: T) -> Result<GsInverse<T>> {
    gs_build_with(p, tol, SETUP_MAX_ITER)
}

pub fn gs_build_with<T: Scalar>(p: &ToeplitzOperator<T>, tol: T, max_iter: usize) -> Result<GsInverse<T>> {
    let m = p.dim();
    let mut e = vec![T::zero(); m];
    e[0] = T::one();
    let v = toeplitz_solve(p, &e, tol, max_iter)?;
    e[0] = T::zero();
    e[m - 1] = T::one();
    let v_tilde = toeplitz_solve(p, &e, tol, max_iter)?;
    GsInverse::from_columns(v, v_tilde)
}

pub fn gs_apply<T: Scalar>(inv: &GsInverse<T>, y: &[T]) -> Result<Vec<T>> {
    inv.apply(y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::FractionalOrder;
    use crate::scheme1d::assemble_galpha;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn precond(alpha: f64, m: usize, eta: f64, dbar: f64) -> ToeplitzOperator<f64> {
        assemble_galpha::<f64>(FractionalOrder::new(alpha).unwrap(), m).affine(1.0, -eta * dbar)
    }

    // Dense Gauss-Jordan inverse with partial pivoting, the oracle for P^-1.
    fn dense_inverse(t: &ToeplitzOperator<f64>) -> Vec<Vec<f64>> {
        let m = t.dim();
        let mut a = t.to_dense();
        let mut inv: Vec<Vec<f64>> = (0..m).map(|i| (0..m).map(|j| (i == j) as u8 as f64).collect()).collect();
        for c in 0..m {
            let p = (c..m).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs())).unwrap();
            a.swap(c, p);
            inv.swap(c, p);
            let piv = a[c][c];
            for j in 0..m {
                a[c][j] /= piv;
                inv[c][j] /= piv;
            }
            for i in 0..m {
                if i != c {
                    let f = a[i][c];
                    for j in 0..m {
                        a[i][j] -= f * a[c][j];
                        inv[i][j] -= f * inv[c][j];
                    }
                }
            }
        }
        inv
    }

    #[test]
    fn identity_gives_unit_columns() {
        let inv = gs_build(&ToeplitzOperator::<f64>::identity(6), 1e-12).unwrap();
        assert!((inv.v1() - 1.0).abs() < 1e-14);
        assert!((inv.v()[0] - 1.0).abs() < 1e-14);
        assert!((inv.v_tilde()[5] - 1.0).abs() < 1e-14);
        let y = [1.0, 2.0, -3.0, 4.0, 0.5, 6.0];
        let x = inv.apply(&y).unwrap();
        for (a, b) in x.iter().zip(&y) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn scalar_case() {
        let p = ToeplitzOperator::<f64>::new(vec![4.0], vec![4.0]).unwrap();
        let inv = gs_build(&p, 1e-12).unwrap();
        assert!((inv.apply(&[2.0]).unwrap()[0] - 0.5).abs() < 1e-14);
    }

    #[test]
    fn matches_dense_inverse_small() {
        let p = precond(1.5, 8, 1.0, 1.0);
        let inv = gs_build(&p, 1e-12).unwrap();
        let dense = dense_inverse(&p);
        for col in 0..8 {
            let mut e = vec![0.0; 8];
            e[col] = 1.0;
            let x = inv.apply(&e).unwrap();
            for row in 0..8 {
                assert!((x[row] - dense[row][col]).abs() < 1e-10, "({row},{col})");
            }
        }
    }

    #[test]
    fn matches_dense_solve_alpha_18() {
        let p = precond(1.8, 64, 5.0, 0.7);
        let inv = gs_build(&p, 1e-12).unwrap();
        let dense = dense_inverse(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let y: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = inv.apply(&y).unwrap();
        let exact: Vec<f64> = dense.iter().map(|row| row.iter().zip(&y).map(|(a, b)| a * b).sum()).collect();
        let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let err = x.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err / scale < 1e-9);
    }

    #[test]
    fn large_round_trip() {
        let p = precond(1.2, 4096, 32.0, 0.6);
        let inv = gs_build(&p, 1e-12).unwrap();
        assert!(inv.v1() > 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y: Vec<f64> = (0..4096).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let back = p.matvec(&inv.apply(&y).unwrap()).unwrap();
        let num: f64 = back.iter().zip(&y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den <= 1e-10, "{}", num / den);
    }

    #[test]
    fn rejects_non_positive_pivot() {
        let err = GsInverse::from_columns(vec![-1.0, 0.0], vec![0.0, 1.0]).unwrap_err();
        assert_eq!(err, OsfdeError::NonPositivePivot(-1.0));
        assert!(gs_build(&ToeplitzOperator::new(vec![-2.0], vec![-2.0]).unwrap(), 1e-12).is_err());
    }
}
