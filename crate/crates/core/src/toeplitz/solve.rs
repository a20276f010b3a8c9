use num_traits::Float;

use super::{CirculantOperator, ToeplitzOperator};
use crate::error::{OsfdeError, Result};
use crate::krylov::{gmres, GmresOptions, LinearOperator};
use crate::Scalar;

/// Strang's circulant approximation: keep the central diagonals of `T` and
/// wrap them around.
pub fn strang_circulant<T: Scalar>(t: &ToeplitzOperator<T>) -> CirculantOperator<T> {
    let m = t.dim();
    let col: Vec<T> = (0..m)
        .map(|k| {
            if k <= m / 2 {
                t.first_col()[k]
            } else {
                t.first_row()[m - k]
            }
        })
        .collect();
    CirculantOperator::new(col).expect("non-empty")
}

/// `x <- C^-1 x` for the Strang circulant, or the identity when the circulant
/// is numerically singular.
pub struct StrangPreconditioner<T> {
    circ: Option<CirculantOperator<T>>,
    dim: usize,
}

impl<T: Scalar> StrangPreconditioner<T> {
    pub fn new(t: &ToeplitzOperator<T>) -> Self {
        let circ = strang_circulant(t);
        let eig = circ.eigenvalues();
        let big = eig.iter().fold(T::zero(), |m, e| Float::max(m, e.norm()));
        let small = eig.iter().fold(T::infinity(), |m, e| Float::min(m, e.norm()));
        let usable = big > T::zero() && small > big * T::epsilon() * T::lit(1e3);
        if !usable {
            log::debug!("Strang circulant singular for m = {}, using identity", t.dim());
        }
        Self {
            dim: t.dim(),
            circ: usable.then_some(circ),
        }
    }

    pub fn is_identity(&self) -> bool {
        self.circ.is_none()
    }
}

impl<T: Scalar> LinearOperator<T> for StrangPreconditioner<T> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        match &self.circ {
            Some(c) => c.solve_into(x, y),
            None => y.copy_from_slice(x),
        }
    }
}

/// Solves `T x = b` with GMRES right-preconditioned by Strang's circulant.
pub fn toeplitz_solve<T: Scalar>(t: &ToeplitzOperator<T>, b: &[T], tol: T, max_iter: usize) -> Result<Vec<T>> {
    if b.len() != t.dim() {
        return Err(OsfdeError::DimensionMismatch {
            expected: t.dim(),
            found: b.len(),
        });
    }
    let pre = StrangPreconditioner::new(t);
    let x0 = vec![T::zero(); t.dim()];
    let res = gmres(t, &pre, b, &x0, &GmresOptions::with_tol(tol, max_iter));
    if res.converged {
        Ok(res.solution)
    } else {
        Err(OsfdeError::InnerSolverDivergence {
            iterations: res.iterations,
            residual: res.true_residual.as_f64(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{wsgd_weights, FractionalOrder};
    use crate::scheme1d::assemble_galpha;

    #[test]
    fn identity_solves_immediately() {
        let t = ToeplitzOperator::<f64>::identity(9);
        let b: Vec<f64> = (0..9).map(|i| (i * i) as f64).collect();
        let x = toeplitz_solve(&t, &b, 1e-12, 5).unwrap();
        for (p, q) in x.iter().zip(&b) {
            assert!((p - q).abs() < 1e-12 * 64.0);
        }
    }

    #[test]
    fn strang_keeps_central_diagonals() {
        let t = ToeplitzOperator::new(vec![1.0, 2.0, 3.0, 4.0, 5.0], vec![1.0, -2.0, -3.0, -4.0, -5.0]).unwrap();
        let c = strang_circulant(&t);
        assert_eq!(c.first_col(), &[1.0, 2.0, 3.0, -3.0, -2.0]);
    }

    #[test]
    fn solves_shifted_fractional_matrix() {
        let alpha = FractionalOrder::new(1.5).unwrap();
        let g = assemble_galpha::<f64>(alpha, 32);
        let t = g.affine(1.0, -3.0);
        let b: Vec<f64> = (0..32).map(|i| ((i as f64) * 0.37).sin()).collect();
        let x = toeplitz_solve(&t, &b, 1e-12, 100).unwrap();
        // Dense residual oracle.
        let r: f64 = (0..32)
            .map(|i| {
                let ax: f64 = (0..32).map(|j| t.entry(i, j) * x[j]).sum();
                (ax - b[i]).powi(2)
            })
            .sum::<f64>()
            .sqrt();
        let bn: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r / bn < 1e-11);
        let _ = wsgd_weights::<f64>(alpha, 1);
    }

    #[test]
    fn large_preconditioner_system_converges_quickly() {
        let alpha = FractionalOrder::new(1.5).unwrap();
        let m = 2048;
        let h = 1.0 / (m as f64 + 1.0);
        let eta = 2f64.powi(-10) / (2.0 * h.powf(1.5));
        let p = assemble_galpha::<f64>(alpha, m).affine(1.0, -eta * 0.6);
        let mut b = vec![0.0; m];
        b[0] = 1.0;
        let pre = StrangPreconditioner::new(&p);
        let res = gmres(&p, &pre, &b, &vec![0.0; m], &GmresOptions::with_tol(1e-12, 100));
        assert!(res.converged, "{} iterations", res.iterations);
        assert!(res.iterations <= 100);
    }

    #[test]
    fn divergence_is_reported() {
        let alpha = FractionalOrder::new(1.8).unwrap();
        let p = assemble_galpha::<f64>(alpha, 256).affine(1.0, -1e4);
        let b = vec![1.0; 256];
        match toeplitz_solve(&p, &b, 1e-15, 1) {
            Err(OsfdeError::InnerSolverDivergence { iterations, .. }) => assert_eq!(iterations, 1),
            other => panic!("unexpected {other:?}"),
        }
    }
}
