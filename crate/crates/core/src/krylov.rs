//! Right-preconditioned GMRES.
//!
//! Solves `A M^-1 y = b` with `x = x0 + M^-1 y`, so the monitored residual is
//! the residual of the original system. The preconditioned directions
//! `M^-1 v_k` are kept, which makes the method safe for preconditioners that
//! are only approximately linear (inner iterative coarse solves). Modified
//! Gram–Schmidt is applied twice per step.

use num_traits::Float;

use crate::scalar::{axpy, dot, norm2};
use crate::Scalar;

/// Anything that maps a vector of length `dim()` to another of the same length.
pub trait LinearOperator<T> {
    fn dim(&self) -> usize;

    /// `y <- Op x`. Panics if either slice has the wrong length.
    fn apply(&self, x: &[T], y: &mut [T]);

    fn apply_vec(&self, x: &[T]) -> Vec<T>
    where
        T: Clone + Default,
    {
        let mut y = vec![T::default(); self.dim()];
        self.apply(x, &mut y);
        y
    }
}

impl<T, O: LinearOperator<T> + ?Sized> LinearOperator<T> for &O {
    fn dim(&self) -> usize {
        (**self).dim()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (**self).apply(x, y)
    }
}

/// The identity map.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl<T: Copy> LinearOperator<T> for Identity {
    fn dim(&self) -> usize {
        self.0
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        y.copy_from_slice(x);
    }
}

/// Wraps a closure `f(x, y)` as an operator.
pub struct FnOperator<F> {
    dim: usize,
    f: F,
}

impl<F> FnOperator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<T, F: Fn(&[T], &mut [T])> LinearOperator<T> for FnOperator<F> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        (self.f)(x, y)
    }
}

/// Norm the stopping test divides by.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ResidualBaseline {
    /// `||r_k|| / ||r_0||`.
    #[default]
    InitialResidual,
    /// `||r_k|| / ||b||`, the convention of MATLAB's `gmres`.
    RightHandSide,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GmresOptions<T> {
    /// Stop once `||r_k|| / ||r_0|| <= rel_tol` (or `/ ||b||`, see `baseline`).
    pub rel_tol: T,
    pub baseline: ResidualBaseline,
    pub max_iter: usize,
    /// Measure the loss of orthogonality of the Krylov basis (costs O(k^2 n)).
    pub check_orthogonality: bool,
}

impl<T: Scalar> Default for GmresOptions<T> {
    fn default() -> Self {
        Self {
            rel_tol: T::lit(1e-7),
            baseline: ResidualBaseline::InitialResidual,
            max_iter: 500,
            check_orthogonality: false,
        }
    }
}

impl<T: Scalar> GmresOptions<T> {
    pub fn with_tol(rel_tol: T, max_iter: usize) -> Self {
        Self {
            rel_tol,
            baseline: ResidualBaseline::InitialResidual,
            max_iter,
            check_orthogonality: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GmresResult<T> {
    pub solution: Vec<T>,
    /// One iteration = one application of `A` and one of `M^-1`.
    pub iterations: usize,
    /// Recurrence estimates of `||r_k|| / ||r_0||`, starting with `1` at `k = 0`.
    pub residual_history: Vec<T>,
    /// `||b - A x|| / ||b - A x0||` recomputed from the returned iterate.
    pub true_residual: T,
    pub converged: bool,
    /// Largest `|<v_i, v_j>|` for `i != j`, when requested.
    pub orthogonality_loss: Option<T>,
}

/// Full (unrestarted) right-preconditioned GMRES with modified Gram–Schmidt.
///
/// When the iteration budget runs out the best iterate is returned with
/// `converged == false`.
pub fn gmres<T, A, M>(a: &A, minv: &M, b: &[T], x0: &[T], opts: &GmresOptions<T>) -> GmresResult<T>
where
    T: Scalar,
    A: LinearOperator<T> + ?Sized,
    M: LinearOperator<T> + ?Sized,
{
    let n = a.dim();
    assert_eq!(b.len(), n, "right-hand side length");
    assert_eq!(x0.len(), n, "initial guess length");
    assert_eq!(minv.dim(), n, "preconditioner dimension");

    let mut x = x0.to_vec();
    let mut r = vec![T::zero(); n];
    a.apply(&x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let beta = norm2(&r);
    let reference = match opts.baseline {
        ResidualBaseline::InitialResidual => beta,
        ResidualBaseline::RightHandSide => {
            let nb = norm2(b);
            if nb > T::zero() {
                nb
            } else {
                beta
            }
        }
    };
    if beta == T::zero() || !beta.is_finite() || beta <= opts.rel_tol * reference {
        return GmresResult {
            solution: x,
            iterations: 0,
            residual_history: vec![T::one()],
            true_residual: if beta.is_finite() { T::zero() } else { beta },
            converged: beta.is_finite(),
            orthogonality_loss: None,
        };
    }

    let max_iter = opts.max_iter.max(1);
    let mut basis: Vec<Vec<T>> = Vec::with_capacity(max_iter.min(64) + 1);
    let mut directions: Vec<Vec<T>> = Vec::with_capacity(max_iter.min(64));
    // Column-wise Hessenberg storage; hess[k] has k + 2 entries.
    let mut hess: Vec<Vec<T>> = Vec::new();
    let mut cs: Vec<T> = Vec::new();
    let mut sn: Vec<T> = Vec::new();
    let mut g = vec![beta];
    let mut history = vec![T::one()];

    let inv = T::one() / beta;
    basis.push(r.iter().map(|&v| v * inv).collect());

    let breakdown = T::epsilon() * T::lit(16.0);
    let mut k = 0;
    while k < max_iter {
        let z = minv.apply_vec(&basis[k]);
        let mut w = a.apply_vec(&z);
        directions.push(z);

        let mut col = vec![T::zero(); basis.len()];
        for _pass in 0..2 {
            for (v, hij) in basis.iter().zip(col.iter_mut()) {
                let c = dot(v, &w);
                axpy(-c, v, &mut w);
                *hij = *hij + c;
            }
        }
        let wnorm = norm2(&w);
        col.push(wnorm);

        for j in 0..k {
            let t = cs[j] * col[j] + sn[j] * col[j + 1];
            col[j + 1] = -sn[j] * col[j] + cs[j] * col[j + 1];
            col[j] = t;
        }
        let (c, s) = givens(col[k], col[k + 1]);
        col[k] = c * col[k] + s * col[k + 1];
        col[k + 1] = T::zero();
        cs.push(c);
        sn.push(s);
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s * gk);
        hess.push(col);

        k += 1;
        let est = Float::abs(g[k]) / beta;
        history.push(est);
        if Float::abs(g[k]) <= opts.rel_tol * reference || wnorm <= breakdown * beta {
            break;
        }
        let inv = T::one() / wnorm;
        basis.push(w.iter().map(|&v| v * inv).collect());
    }

    // Back substitution on the k x k triangular factor.
    let mut y = vec![T::zero(); k];
    for i in (0..k).rev() {
        let mut s = g[i];
        for j in (i + 1)..k {
            s = s - hess[j][i] * y[j];
        }
        y[i] = s / hess[i][i];
    }
    for (yj, zj) in y.iter().zip(&directions) {
        axpy(*yj, zj, &mut x);
    }

    a.apply(&x, &mut r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
    let true_residual = norm2(&r) / beta;
    let est = Float::abs(g[k]);
    let ten = T::lit(10.0);
    let scale = reference / beta;
    let converged = est <= opts.rel_tol * reference && true_residual <= ten * opts.rel_tol * scale;

    let orthogonality_loss = opts.check_orthogonality.then(|| {
        let mut worst = T::zero();
        for i in 0..basis.len() {
            for j in 0..i {
                worst = Float::max(worst, Float::abs(dot(&basis[i], &basis[j])));
            }
        }
        worst
    });

    GmresResult {
        solution: x,
        iterations: k,
        residual_history: history,
        true_residual,
        converged,
        orthogonality_loss,
    }
}

fn givens<T: Scalar>(a: T, b: T) -> (T, T) {
    if b == T::zero() {
        (T::one(), T::zero())
    } else {
        let r = a.hypot(b);
        (a / r, b / r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    struct Dense {
        n: usize,
        a: Vec<f64>,
    }

    impl LinearOperator<f64> for Dense {
        fn dim(&self) -> usize {
            self.n
        }
        fn apply(&self, x: &[f64], y: &mut [f64]) {
            for i in 0..self.n {
                y[i] = (0..self.n).map(|j| self.a[i * self.n + j] * x[j]).sum();
            }
        }
    }

    // Gaussian elimination with partial pivoting, kept local as an independent oracle.
    fn dense_solve(n: usize, a: &[f64], b: &[f64]) -> Vec<f64> {
        let mut m = a.to_vec();
        let mut x = b.to_vec();
        for c in 0..n {
            let p = (c..n)
                .max_by(|&i, &j| m[i * n + c].abs().total_cmp(&m[j * n + c].abs()))
                .unwrap();
            for j in 0..n {
                m.swap(c * n + j, p * n + j);
            }
            x.swap(c, p);
            for i in c + 1..n {
                let f = m[i * n + c] / m[c * n + c];
                for j in c..n {
                    m[i * n + j] -= f * m[c * n + j];
                }
                x[i] -= f * x[c];
            }
        }
        for i in (0..n).rev() {
            let s: f64 = (i + 1..n).map(|j| m[i * n + j] * x[j]).sum();
            x[i] = (x[i] - s) / m[i * n + i];
        }
        x
    }

    fn random_dominant(n: usize, rng: &mut ChaCha8Rng) -> Dense {
        let mut a: Vec<f64> = (0..n * n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for i in 0..n {
            a[i * n + i] += n as f64;
        }
        Dense { n, a }
    }

    #[test]
    fn identity_converges_in_one_iteration() {
        let b = vec![1.0, -2.0, 3.0, 0.5];
        let r = gmres(&Identity(4), &Identity(4), &b, &[0.0; 4], &GmresOptions::default());
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
        for (x, y) in r.solution.iter().zip(&b) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn rhs_baseline_stops_earlier_from_good_guess() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = 40;
        let a = random_dominant(n, &mut rng);
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.apply_vec(&x);
        let guess: Vec<f64> = x.iter().map(|v| v + 1e-4).collect();
        let strict = gmres(&a, &Identity(n), &b, &guess, &GmresOptions::default());
        let loose = gmres(
            &a,
            &Identity(n),
            &b,
            &guess,
            &GmresOptions {
                baseline: ResidualBaseline::RightHandSide,
                ..GmresOptions::default()
            },
        );
        assert!(strict.converged && loose.converged);
        assert!(loose.iterations < strict.iterations);
        let res = a.apply_vec(&loose.solution);
        let r: f64 = res.iter().zip(&b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(r / nb <= 1e-6);
    }

    #[test]
    fn zero_rhs_takes_no_iterations() {
        let r = gmres(&Identity(3), &Identity(3), &[0.0; 3], &[0.0; 3], &GmresOptions::default());
        assert!(r.converged);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn perfect_preconditioner_takes_one_iteration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 20;
        let a = random_dominant(n, &mut rng);
        let a_copy = a.a.clone();
        let minv = FnOperator::new(n, move |x: &[f64], y: &mut [f64]| {
            y.copy_from_slice(&dense_solve(n, &a_copy, x));
        });
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = gmres(&a, &minv, &b, &vec![0.0; n], &GmresOptions::default());
        assert!(r.converged);
        assert_eq!(r.iterations, 1);
    }

    #[test]
    fn matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 50;
        let a = random_dominant(n, &mut rng);
        let b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let opts = GmresOptions {
            check_orthogonality: true,
            ..GmresOptions::with_tol(1e-10, 500)
        };
        let r = gmres(&a, &Identity(n), &b, &vec![0.0; n], &opts);
        let exact = dense_solve(n, &a.a, &b);
        let err = r.solution.iter().zip(&exact).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let scale = exact.iter().map(|v| v.abs()).fold(0.0, f64::max);
        assert!(err / scale < 1e-6, "relative error {}", err / scale);
        let loss = r.orthogonality_loss.unwrap();
        assert!(loss < 1e-10, "loss {loss:e} after {} iterations", r.iterations);
        assert!(r.residual_history.windows(2).all(|w| w[1] <= w[0]));
    }

    #[test]
    fn reports_non_convergence() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_dominant(30, &mut rng);
        let b = vec![1.0; 30];
        let r = gmres(&a, &Identity(30), &b, &vec![0.0; 30], &GmresOptions::with_tol(1e-14, 2));
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
        assert!(r.true_residual < 1.0);
    }

    #[test]
    fn single_precision_solve() {
        let a = FnOperator::new(3, |x: &[f32], y: &mut [f32]| {
            y[0] = 4.0 * x[0] + x[1];
            y[1] = x[0] + 3.0 * x[1] + x[2];
            y[2] = x[1] + 2.0 * x[2];
        });
        let r = gmres(&a, &Identity(3), &[1.0f32, 2.0, 3.0], &[0.0; 3], &GmresOptions::with_tol(1e-5, 10));
        assert!(r.converged);
        assert!(r.iterations <= 3);
    }
}
