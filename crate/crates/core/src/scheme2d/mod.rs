//! Two-dimensional scheme
//!
//! ```text
//! u_t = d(x, y) D_x^alpha u + e(x, y) D_y^beta u + f
//! ```
//!
//! on a rectangle with zero boundary values. Unknowns are ordered y-major,
//! `k = j m1 + i` with `i` the x index. Each step solves
//! `(I + D B_x + E B_y) u^n = (I - D B_x - E B_y) u^{n-1} + tau f^{n-1/2}`
//! where `B_x = -eta_x (I (x) G_alpha)` and `B_y = -eta_y (G_beta (x) I)`.

mod multigrid;

use std::sync::Arc;
use std::time::Instant;

use num_traits::Float;
use rayon::prelude::*;

pub use multigrid::{prolong_2d, restrict_2d, LineBlocks, MultigridOptions, Precond2D};

use crate::analysis::dense::{dense_assemble_2d, LuFactors};
use crate::error::{OsfdeError, Result};
use crate::kernel::FractionalOrder;
use crate::krylov::{gmres, LinearOperator};
use crate::scheme1d::{
    assemble_galpha, l2_norm, EnergyMonitor, InitialGuess, LinearSolver, Solution, SolveReport, SolverOptions,
    StepSide, TimeGrid,
};
use crate::toeplitz::ToeplitzOperator;
use crate::Scalar;

pub type Coefficient3<T> = Arc<dyn Fn(T, T, T) -> T + Send + Sync>;
pub type Field2<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid2D<T> {
    pub x_left: T,
    pub x_right: T,
    pub y_left: T,
    pub y_right: T,
    pub m1: usize,
    pub m2: usize,
}

impl<T: Scalar> Grid2D<T> {
    pub fn new(x: (T, T), y: (T, T), m1: usize, m2: usize) -> Result<Self> {
        if m1 == 0 || m2 == 0 || !(x.1 > x.0) || !(y.1 > y.0) {
            return Err(OsfdeError::InvalidGrid(format!(
                "need non-empty rectangle and m1, m2 >= 1 (m1 = {m1}, m2 = {m2})"
            )));
        }
        Ok(Self {
            x_left: x.0,
            x_right: x.1,
            y_left: y.0,
            y_right: y.1,
            m1,
            m2,
        })
    }

    pub fn h1(&self) -> T {
        (self.x_right - self.x_left) / T::from_usize_lossy(self.m1 + 1)
    }

    pub fn h2(&self) -> T {
        (self.y_right - self.y_left) / T::from_usize_lossy(self.m2 + 1)
    }

    pub fn len(&self) -> usize {
        self.m1 * self.m2
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Interior node for the y-major index `k`.
    pub fn node(&self, k: usize) -> (T, T) {
        let (i, j) = (k % self.m1, k / self.m1);
        (
            self.x_left + T::from_usize_lossy(i + 1) * self.h1(),
            self.y_left + T::from_usize_lossy(j + 1) * self.h2(),
        )
    }

    pub fn nodes(&self) -> Vec<(T, T)> {
        (0..self.len()).map(|k| self.node(k)).collect()
    }

    pub fn sample(&self, f: impl Fn(T, T) -> T) -> Vec<T> {
        (0..self.len()).map(|k| {
            let (x, y) = self.node(k);
            f(x, y)
        }).collect()
    }
}

#[derive(Clone)]
pub struct Problem2D<T> {
    pub x: (T, T),
    pub y: (T, T),
    pub t_end: T,
    pub alpha: FractionalOrder,
    pub beta: FractionalOrder,
    /// Positive coefficient of the x derivative.
    pub d: Field2<T>,
    /// Nonnegative coefficient of the y derivative.
    pub e: Field2<T>,
    pub forcing: Coefficient3<T>,
    pub initial: Field2<T>,
    pub exact: Option<Coefficient3<T>>,
}

impl<T> std::fmt::Debug for Problem2D<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem2D")
            .field("alpha", &self.alpha)
            .field("beta", &self.beta)
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

impl<T: Scalar> Problem2D<T> {
    pub fn grid(&self, m1: usize, m2: usize) -> Result<Grid2D<T>> {
        Grid2D::new(self.x, self.y, m1, m2)
    }

    /// Samples `d` and `e`, rejecting `d <= 0` and `e < 0`.
    pub fn sample_coefficients(&self, grid: &Grid2D<T>) -> Result<(Vec<T>, Vec<T>)> {
        let d = grid.sample(|x, y| (self.d)(x, y));
        let e = grid.sample(|x, y| (self.e)(x, y));
        if let Some((k, &v)) = d.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
            return Err(OsfdeError::NonPositiveDiffusion {
                index: k,
                value: v.as_f64(),
            });
        }
        if let Some((k, &v)) = e.iter().enumerate().find(|(_, &v)| !(v >= T::zero())) {
            return Err(OsfdeError::NegativeCoefficient {
                name: "e",
                index: k,
                value: v.as_f64(),
            });
        }
        Ok((d, e))
    }
}

/// y-major to x-major: `out[i m2 + j] = u[j m1 + i]`.
pub fn xy_permute<T: Copy + Send + Sync>(u: &[T], m1: usize, m2: usize) -> Vec<T> {
    assert_eq!(u.len(), m1 * m2);
    let mut out = Vec::with_capacity(u.len());
    for i in 0..m1 {
        for j in 0..m2 {
            out.push(u[j * m1 + i]);
        }
    }
    out
}

/// Inverse of [`xy_permute`].
pub fn xy_unpermute<T: Copy + Send + Sync>(v: &[T], m1: usize, m2: usize) -> Vec<T> {
    xy_permute(v, m2, m1)
}

/// `out <- (I_{m2} (x) G) u` for y-major `u`.
pub(crate) fn apply_kron_x<T: Scalar>(g: &ToeplitzOperator<T>, m1: usize, u: &[T], out: &mut [T]) {
    out.par_chunks_mut(m1)
        .zip(u.par_chunks(m1))
        .for_each(|(o, x)| g.apply_into(x, o));
}

/// `out <- (G (x) I_{m1}) u` for y-major `u`.
pub(crate) fn apply_kron_y<T: Scalar>(g: &ToeplitzOperator<T>, m1: usize, m2: usize, u: &[T], out: &mut [T]) {
    let v = xy_permute(u, m1, m2);
    let mut w = vec![T::zero(); v.len()];
    w.par_chunks_mut(m2)
        .zip(v.par_chunks(m2))
        .for_each(|(o, x)| g.apply_into(x, o));
    out.copy_from_slice(&xy_unpermute(&w, m1, m2));
}

#[derive(Clone, Debug)]
pub struct SystemOperator2D<T> {
    pub m1: usize,
    pub m2: usize,
    pub gx: Arc<ToeplitzOperator<T>>,
    pub gy: Arc<ToeplitzOperator<T>>,
    pub d: Vec<T>,
    pub e: Vec<T>,
    pub eta_x: T,
    pub eta_y: T,
    pub side: StepSide,
}

impl<T: Scalar> LinearOperator<T> for SystemOperator2D<T> {
    fn dim(&self) -> usize {
        self.m1 * self.m2
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.dim();
        let mut gyx = vec![T::zero(); n];
        apply_kron_x(&self.gx, self.m1, x, y);
        apply_kron_y(&self.gy, self.m1, self.m2, x, &mut gyx);
        let s = match self.side {
            StepSide::Implicit => -T::one(),
            StepSide::Explicit => T::one(),
        };
        let (ex, ey) = (s * self.eta_x, s * self.eta_y);
        y.par_iter_mut()
            .zip(gyx.par_iter())
            .zip(x.par_iter())
            .zip(self.d.par_iter().zip(self.e.par_iter()))
            .for_each(|(((yk, &gk), &xk), (&dk, &ek))| {
                *yk = xk + ex * dk * *yk + ey * ek * gk;
            });
    }
}

/// Diagonal weight for the discrete energy estimate, in y-major ordering.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum StabilityWeight<T> {
    /// Skip the check.
    #[default]
    None,
    Identity,
    InverseD,
    InverseE,
    /// Arbitrary positive diagonal.
    Diagonal(Vec<T>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions2D<T> {
    pub base: SolverOptions<T>,
    pub multigrid: MultigridOptions<T>,
    pub stability_weight: StabilityWeight<T>,
}

impl<T: Scalar> Default for SolverOptions2D<T> {
    fn default() -> Self {
        Self {
            base: SolverOptions::default(),
            multigrid: MultigridOptions::default(),
            stability_weight: StabilityWeight::None,
        }
    }
}

pub struct StepMatrices2D<T> {
    pub a: SystemOperator2D<T>,
    pub b: SystemOperator2D<T>,
    pub d_mean: T,
    pub e_mean: T,
}

pub fn step_matrices_2d<T: Scalar>(
    problem: &Problem2D<T>,
    grid: &Grid2D<T>,
    tgrid: &TimeGrid<T>,
) -> Result<StepMatrices2D<T>> {
    let (d, e) = problem.sample_coefficients(grid)?;
    let tau = tgrid.tau();
    let two = T::lit(2.0);
    let eta_x = tau / (two * grid.h1().powf(T::lit(problem.alpha.value())));
    let eta_y = tau / (two * grid.h2().powf(T::lit(problem.beta.value())));
    let n = T::from_usize_lossy(d.len());
    let d_mean = d.iter().copied().sum::<T>() / n;
    let e_mean = e.iter().copied().sum::<T>() / n;
    let gx = Arc::new(assemble_galpha::<T>(problem.alpha, grid.m1));
    let gy = Arc::new(assemble_galpha::<T>(problem.beta, grid.m2));
    let a = SystemOperator2D {
        m1: grid.m1,
        m2: grid.m2,
        gx,
        gy,
        d,
        e,
        eta_x,
        eta_y,
        side: StepSide::Implicit,
    };
    let b = SystemOperator2D {
        side: StepSide::Explicit,
        ..a.clone()
    };
    Ok(StepMatrices2D { a, b, d_mean, e_mean })
}

pub fn advance_2d<T: Scalar>(
    problem: &Problem2D<T>,
    grid: &Grid2D<T>,
    tgrid: &TimeGrid<T>,
    opts: &SolverOptions2D<T>,
) -> Result<Solution<T>> {
    let setup_start = Instant::now();
    let base = &opts.base;
    let ops = step_matrices_2d(problem, grid, tgrid)?;
    let (solver_lu, precond) = match base.solver {
        LinearSolver::Plu => {
            let dense = dense_assemble_2d(
                problem.alpha,
                problem.beta,
                grid.m1,
                grid.m2,
                &ops.a.d,
                &ops.a.e,
                ops.a.eta_x,
                ops.a.eta_y,
            )?;
            (Some(LuFactors::factor(dense)?), None)
        }
        LinearSolver::PgmresT => {
            let p = Precond2D::new(
                problem.alpha,
                problem.beta,
                grid,
                tgrid.tau(),
                ops.d_mean,
                ops.e_mean,
                base.setup_tol,
                &opts.multigrid,
            )?;
            (None, Some(p))
        }
    };
    let setup_seconds = setup_start.elapsed().as_secs_f64();

    let solve_start = Instant::now();
    let n_unknowns = grid.len();
    let nodes = grid.nodes();
    let measure = grid.h1() * grid.h2();
    let tau = tgrid.tau();
    let mut u: Vec<T> = nodes.iter().map(|&(x, y)| (problem.initial)(x, y)).collect();

    let weight = match &opts.stability_weight {
        StabilityWeight::None => None,
        StabilityWeight::Identity => Some(vec![T::one(); n_unknowns]),
        StabilityWeight::InverseD => Some(ops.a.d.iter().map(|&v| T::one() / v).collect()),
        StabilityWeight::InverseE => {
            if let Some((k, &v)) = ops.a.e.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
                return Err(OsfdeError::NegativeCoefficient {
                    name: "e",
                    index: k,
                    value: v.as_f64(),
                });
            }
            Some(ops.a.e.iter().map(|&v| T::one() / v).collect())
        }
        StabilityWeight::Diagonal(w) => {
            if w.len() != n_unknowns {
                return Err(OsfdeError::DimensionMismatch {
                    expected: n_unknowns,
                    found: w.len(),
                });
            }
            Some(w.clone())
        }
    };
    let mut energy = weight.map(|w| {
        EnergyMonitor::new(w, measure, tgrid.t_end, &u, base.check_stability && tau <= T::one())
    });

    let exact_error = |u: &[T], t: T| -> Option<T> {
        problem.exact.as_ref().map(|ex| {
            let e: Vec<T> = nodes.iter().zip(u).map(|(&(x, y), &v)| ex(x, y, t) - v).collect();
            l2_norm(&e, measure)
        })
    };
    let mut max_err = exact_error(&u, T::zero());
    let mut report = SolveReport::default();
    let mut history = base.keep_history.then(|| vec![u.clone()]);
    let mut rhs = vec![T::zero(); n_unknowns];
    let mut f = vec![T::zero(); n_unknowns];

    for n in 1..=tgrid.n {
        let t_half = tgrid.half_step(n);
        f.par_iter_mut()
            .zip(nodes.par_iter())
            .for_each(|(fk, &(x, y))| *fk = (problem.forcing)(x, y, t_half));
        ops.b.apply(&u, &mut rhs);
        for (r, &fk) in rhs.iter_mut().zip(&f) {
            *r = *r + tau * fk;
        }
        let next = if let Some(lu) = &solver_lu {
            lu.solve(&rhs)
        } else {
            let p = precond.as_ref().expect("preconditioner built");
            let x0 = match base.initial_guess {
                InitialGuess::Previous => u.clone(),
                InitialGuess::Zero => vec![T::zero(); n_unknowns],
            };
            let res = gmres(&ops.a, p, &rhs, &x0, &base.gmres);
            if !res.converged {
                return Err(OsfdeError::GmresDivergence {
                    step: n,
                    iterations: res.iterations,
                    residual: res.true_residual.as_f64(),
                });
            }
            report.iterations.push(res.iterations);
            report
                .residual_histories
                .push(res.residual_history.iter().map(|v| v.as_f64()).collect());
            res.solution
        };
        u = next;
        if let Some(m) = energy.as_mut() {
            m.record(n, &u, &f)?;
        }
        if let Some(e) = exact_error(&u, tgrid.time(n)) {
            max_err = max_err.map(|m| Float::max(m, e));
        }
        if let Some(h) = history.as_mut() {
            h.push(u.clone());
        }
    }

    report.error = max_err.map(|e| e.as_f64());
    report.energy_ratio = energy.map(|m| m.worst_ratio());
    report.setup_seconds = setup_seconds;
    report.solve_seconds = solve_start.elapsed().as_secs_f64();
    Ok(Solution {
        final_state: u,
        history,
        report,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::dense::dense_assemble_2d;
    use crate::problems;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    proptest! {
        #[test]
        fn permutation_round_trip(m1 in 1usize..20, m2 in 1usize..20, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let u: Vec<f64> = (0..m1 * m2).map(|_| rng.gen()).collect();
            let v = xy_permute(&u, m1, m2);
            prop_assert_eq!(xy_unpermute(&v, m1, m2), u.clone());
            for i in 0..m1 {
                for j in 0..m2 {
                    prop_assert_eq!(v[i * m2 + j], u[j * m1 + i]);
                }
            }
        }
    }

    #[test]
    fn system_operator_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let (m1, m2) = (7, 5);
        let n = m1 * m2;
        let (a, b) = (order(1.3), order(1.7));
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..2.0)).collect();
        let e: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
        let op = SystemOperator2D {
            m1,
            m2,
            gx: Arc::new(assemble_galpha(a, m1)),
            gy: Arc::new(assemble_galpha(b, m2)),
            d: d.clone(),
            e: e.clone(),
            eta_x: 1.7,
            eta_y: 0.6,
            side: StepSide::Implicit,
        };
        let dense = dense_assemble_2d(a, b, m1, m2, &d, &e, 1.7, 0.6).unwrap();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let y = op.apply_vec(&x);
        let z = dense.matvec(&x);
        for (p, q) in y.iter().zip(&z) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_negative_e() {
        let mut p = problems::example2::<f64>(order(1.5), order(1.5));
        p.e = Arc::new(|x, _| x - 1.0);
        let g = p.grid(7, 7).unwrap();
        assert!(matches!(
            p.sample_coefficients(&g),
            Err(OsfdeError::NegativeCoefficient { name: "e", .. })
        ));
    }

    #[test]
    fn example2_coarse_run() {
        let p = problems::example2::<f64>(order(1.5), order(1.5));
        let g = p.grid(15, 15).unwrap();
        let tg = TimeGrid::new(1.0, 16).unwrap();
        let opts = SolverOptions2D {
            stability_weight: StabilityWeight::Identity,
            ..SolverOptions2D::default()
        };
        let sol = advance_2d(&p, &g, &tg, &opts).unwrap();
        assert!(sol.report.error.unwrap() < 0.1);
        assert!(sol.report.energy_ratio.unwrap() <= 1.0);
        let plu = advance_2d(
            &p,
            &g,
            &tg,
            &SolverOptions2D {
                base: SolverOptions {
                    solver: LinearSolver::Plu,
                    ..SolverOptions::default()
                },
                ..SolverOptions2D::default()
            },
        )
        .unwrap();
        let diff = plu
            .final_state
            .iter()
            .zip(&sol.final_state)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-5, "diff {diff}");
    }
}
