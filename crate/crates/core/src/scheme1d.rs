//! Crank–Nicolson / WSGD time stepping for the one-dimensional problem
//!
//! ```text
//! u_t = d(x) D^alpha u + f,   u(x_L) = u(x_R) = 0,   u(x, 0) = phi(x).
//! ```
//!
//! Each step solves `(I - eta D G) u^n = (I + eta D G) u^{n-1} + tau f^{n-1/2}`
//! with `eta = tau / (2 h^alpha)`, preconditioned by the Toeplitz matrix
//! `I - eta mean(d) G` whose inverse is applied through Gohberg–Semencul.

use std::sync::Arc;
use std::time::Instant;

use num_traits::Float;

use crate::analysis::dense::{dense_assemble_1d, LuFactors};
use crate::error::{OsfdeError, Result};
use crate::kernel::{wsgd_weights, FractionalOrder};
use crate::krylov::{gmres, GmresOptions, LinearOperator};
use crate::toeplitz::{gs_build, GsInverse, ToeplitzOperator};
use crate::Scalar;

pub type Coefficient1<T> = Arc<dyn Fn(T) -> T + Send + Sync>;
pub type Coefficient2<T> = Arc<dyn Fn(T, T) -> T + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D<T> {
    pub x_left: T,
    pub x_right: T,
    /// Interior node count.
    pub m: usize,
}

impl<T: Scalar> Grid1D<T> {
    pub fn new(x_left: T, x_right: T, m: usize) -> Result<Self> {
        if m == 0 || !(x_right > x_left) {
            return Err(OsfdeError::InvalidGrid(format!(
                "need m >= 1 and x_right > x_left (m = {m})"
            )));
        }
        Ok(Self { x_left, x_right, m })
    }

    /// Grid with spacing `h`; `(x_right - x_left) / h` must be an integer.
    pub fn with_step(x_left: T, x_right: T, h: T) -> Result<Self> {
        let cells = ((x_right - x_left) / h).round();
        let m = cells.to_usize().unwrap_or(0).saturating_sub(1);
        Self::new(x_left, x_right, m)
    }

    pub fn h(&self) -> T {
        (self.x_right - self.x_left) / T::from_usize_lossy(self.m + 1)
    }

    /// `x_i = x_left + i h`, `i = 0..=m+1`.
    pub fn node(&self, i: usize) -> T {
        self.x_left + T::from_usize_lossy(i) * self.h()
    }

    pub fn interior(&self) -> Vec<T> {
        (1..=self.m).map(|i| self.node(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid<T> {
    pub t_end: T,
    pub n: usize,
}

impl<T: Scalar> TimeGrid<T> {
    pub fn new(t_end: T, n: usize) -> Result<Self> {
        if n == 0 || !(t_end > T::zero()) {
            return Err(OsfdeError::InvalidGrid(format!("need n >= 1 and T > 0 (n = {n})")));
        }
        Ok(Self { t_end, n })
    }

    pub fn with_step(t_end: T, tau: T) -> Result<Self> {
        let n = (t_end / tau).round().to_usize().unwrap_or(0);
        Self::new(t_end, n)
    }

    pub fn tau(&self) -> T {
        self.t_end / T::from_usize_lossy(self.n)
    }

    pub fn time(&self, n: usize) -> T {
        T::from_usize_lossy(n) * self.tau()
    }

    /// `t_{n-1/2}` for `n >= 1`.
    pub fn half_step(&self, n: usize) -> T {
        (T::from_usize_lossy(n) - T::lit(0.5)) * self.tau()
    }
}

/// One-dimensional problem data. Boundary values are zero.
#[derive(Clone)]
pub struct Problem1D<T> {
    pub x_left: T,
    pub x_right: T,
    pub t_end: T,
    /// Strictly positive diffusion coefficient `d(x)`.
    pub diffusion: Coefficient1<T>,
    /// Source `f(x, t)`.
    pub forcing: Coefficient2<T>,
    pub initial: Coefficient1<T>,
    pub exact: Option<Coefficient2<T>>,
}

impl<T: Scalar> Problem1D<T> {
    pub fn grid(&self, m: usize) -> Result<Grid1D<T>> {
        Grid1D::new(self.x_left, self.x_right, m)
    }

    pub fn sample_diffusion(&self, grid: &Grid1D<T>) -> Result<Vec<T>> {
        let d: Vec<T> = grid.interior().into_iter().map(|x| (self.diffusion)(x)).collect();
        if let Some((i, &v)) = d.iter().enumerate().find(|(_, &v)| !(v > T::zero())) {
            return Err(OsfdeError::NonPositiveDiffusion {
                index: i + 1,
                value: v.as_f64(),
            });
        }
        Ok(d)
    }
}

impl<T> std::fmt::Debug for Problem1D<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Problem1D")
            .field("has_exact", &self.exact.is_some())
            .finish_non_exhaustive()
    }
}

/// `G_alpha`: lower Hessenberg Toeplitz matrix with `w_1` on the diagonal,
/// `w_0` on the superdiagonal and `w_k` on the `(k-1)`-th subdiagonal.
pub fn assemble_galpha<T: Scalar>(alpha: FractionalOrder, m: usize) -> ToeplitzOperator<T> {
    assert!(m >= 1, "G_alpha needs at least one node");
    let kernel = wsgd_weights::<T>(alpha, m);
    let w = kernel.w();
    let col = w[1..=m].to_vec();
    let mut row = vec![T::zero(); m];
    row[0] = w[1];
    if m > 1 {
        row[1] = w[0];
    }
    ToeplitzOperator::new(col, row).expect("consistent shape")
}

/// Which member of the Crank–Nicolson pair an operator applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepSide {
    /// `I - eta D G` (left-hand side).
    Implicit,
    /// `I + eta D G` (right-hand side).
    Explicit,
}

#[derive(Clone, Debug)]
pub struct SystemOperator1D<T> {
    pub kernel: Arc<ToeplitzOperator<T>>,
    pub diag_d: Vec<T>,
    pub eta: T,
    pub side: StepSide,
}

impl<T: Scalar> LinearOperator<T> for SystemOperator1D<T> {
    fn dim(&self) -> usize {
        self.diag_d.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.kernel.apply_into(x, y);
        let s = match self.side {
            StepSide::Implicit => -self.eta,
            StepSide::Explicit => self.eta,
        };
        for ((yi, &xi), &di) in y.iter_mut().zip(x).zip(&self.diag_d) {
            *yi = xi + s * di * *yi;
        }
    }
}

pub struct StepMatrices<T> {
    pub a: SystemOperator1D<T>,
    pub b: SystemOperator1D<T>,
    pub precond: GsInverse<T>,
    /// Toeplitz preconditioner `I - eta mean(d) G`.
    pub p: ToeplitzOperator<T>,
    pub d_mean: T,
    pub eta: T,
}

/// Builds the step operators and the Gohberg–Semencul preconditioner.
pub fn step_matrices<T: Scalar>(
    problem: &Problem1D<T>,
    grid: &Grid1D<T>,
    tgrid: &TimeGrid<T>,
    alpha: FractionalOrder,
    setup_tol: T,
) -> Result<StepMatrices<T>> {
    let d = problem.sample_diffusion(grid)?;
    let eta = tgrid.tau() / (T::lit(2.0) * grid.h().powf(T::lit(alpha.value())));
    let kernel = Arc::new(assemble_galpha::<T>(alpha, grid.m));
    let d_mean = d.iter().copied().sum::<T>() / T::from_usize_lossy(d.len());
    let p = kernel.affine(T::one(), -eta * d_mean);
    let precond = gs_build(&p, setup_tol)?;
    let a = SystemOperator1D {
        kernel: kernel.clone(),
        diag_d: d.clone(),
        eta,
        side: StepSide::Implicit,
    };
    let b = SystemOperator1D {
        kernel,
        diag_d: d,
        eta,
        side: StepSide::Explicit,
    };
    Ok(StepMatrices {
        a,
        b,
        precond,
        p,
        d_mean,
        eta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// GMRES with the Toeplitz preconditioner.
    #[default]
    PgmresT,
    /// Dense pivoted LU, factored once per run.
    Plu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    /// Start each step from `u^{n-1}`.
    #[default]
    Previous,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<T> {
    pub solver: LinearSolver,
    pub gmres: GmresOptions<T>,
    pub initial_guess: InitialGuess,
    /// Tolerance of the two Toeplitz solves behind each Gohberg–Semencul inverse.
    pub setup_tol: T,
    pub keep_history: bool,
    /// Fail with [`OsfdeError::StabilityViolation`] if the energy estimate breaks.
    pub check_stability: bool,
}

impl<T: Scalar> Default for SolverOptions<T> {
    fn default() -> Self {
        Self {
            solver: LinearSolver::PgmresT,
            gmres: GmresOptions::default(),
            initial_guess: InitialGuess::Previous,
            setup_tol: T::lit(1e-12),
            keep_history: false,
            check_stability: true,
        }
    }
}

/// Per-run diagnostics.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SolveReport {
    /// GMRES iterations per time step (empty for direct solves).
    pub iterations: Vec<usize>,
    pub residual_histories: Vec<Vec<f64>>,
    /// `max_n ||e^n||` with the discrete L2 norm, when the exact solution is known.
    pub error: Option<f64>,
    /// Largest ratio lhs/rhs of the energy estimate over all steps.
    pub energy_ratio: Option<f64>,
    pub setup_seconds: f64,
    pub solve_seconds: f64,
}

impl SolveReport {
    pub fn mean_iterations(&self) -> f64 {
        if self.iterations.is_empty() {
            0.0
        } else {
            self.iterations.iter().sum::<usize>() as f64 / self.iterations.len() as f64
        }
    }

    pub fn total_seconds(&self) -> f64 {
        self.setup_seconds + self.solve_seconds
    }
}

#[derive(Debug, Clone)]
pub struct Solution<T> {
    pub final_state: Vec<T>,
    /// `u^0..u^N` when requested.
    pub history: Option<Vec<Vec<T>>>,
    pub report: SolveReport,
}

/// Tracks `||u^n||_W^2 <= e^{2T} ||phi||_W^2 + (e^{2T} - 1) max_k ||f^{k-1/2}||_W^2`
/// for a diagonal weight `W` and cell measure `h`.
pub(crate) struct EnergyMonitor<T> {
    weight: Vec<T>,
    measure: T,
    growth: T,
    initial: T,
    forcing_max: T,
    worst_ratio: f64,
    enforce: bool,
}

impl<T: Scalar> EnergyMonitor<T> {
    pub(crate) fn new(weight: Vec<T>, measure: T, t_end: T, u0: &[T], enforce: bool) -> Self {
        let mut m = Self {
            weight,
            measure,
            growth: (T::lit(2.0) * t_end).exp(),
            initial: T::zero(),
            forcing_max: T::zero(),
            worst_ratio: 0.0,
            enforce,
        };
        m.initial = m.norm_sq(u0);
        m
    }

    pub(crate) fn norm_sq(&self, v: &[T]) -> T {
        self.measure * v.iter().zip(&self.weight).fold(T::zero(), |s, (&x, &w)| s + w * x * x)
    }

    pub(crate) fn record(&mut self, step: usize, u: &[T], forcing: &[T]) -> Result<()> {
        self.forcing_max = Float::max(self.forcing_max, self.norm_sq(forcing));
        let lhs = self.norm_sq(u);
        let rhs = self.growth * self.initial + (self.growth - T::one()) * self.forcing_max;
        let ratio = if rhs > T::zero() {
            (lhs / rhs).as_f64()
        } else if lhs > T::zero() {
            f64::INFINITY
        } else {
            0.0
        };
        self.worst_ratio = self.worst_ratio.max(ratio);
        let slack = T::lit(1e-10);
        if self.enforce && lhs > rhs * (T::one() + slack) + T::min_positive_value() {
            return Err(OsfdeError::StabilityViolation {
                step,
                lhs: lhs.as_f64(),
                rhs: rhs.as_f64(),
            });
        }
        Ok(())
    }

    pub(crate) fn worst_ratio(&self) -> f64 {
        self.worst_ratio
    }
}

/// Discrete L2 norm `sqrt(measure * sum v_i^2)`.
pub(crate) fn l2_norm<T: Scalar>(v: &[T], measure: T) -> T {
    (measure * v.iter().fold(T::zero(), |s, &x| s + x * x)).sqrt()
}

/// Advances the scheme from `t = 0` to `t = T`.
pub fn advance<T: Scalar>(
    problem: &Problem1D<T>,
    grid: &Grid1D<T>,
    tgrid: &TimeGrid<T>,
    alpha: FractionalOrder,
    opts: &SolverOptions<T>,
) -> Result<Solution<T>> {
    let setup_start = Instant::now();
    let xs = grid.interior();
    let h = grid.h();
    let tau = tgrid.tau();
    let ops = step_matrices(problem, grid, tgrid, alpha, opts.setup_tol)?;
    let lu = match opts.solver {
        LinearSolver::Plu => {
            let dense = dense_assemble_1d(alpha, &ops.a.diag_d, ops.eta)?;
            Some(LuFactors::factor(dense)?)
        }
        LinearSolver::PgmresT => None,
    };
    let setup_seconds = setup_start.elapsed().as_secs_f64();

    let solve_start = Instant::now();
    let mut u: Vec<T> = xs.iter().map(|&x| (problem.initial)(x)).collect();
    let weight: Vec<T> = ops.a.diag_d.iter().map(|&d| T::one() / d).collect();
    let mut energy = EnergyMonitor::new(weight, h, tgrid.t_end, &u, opts.check_stability && tau <= T::one());

    let exact_error = |u: &[T], t: T| -> Option<T> {
        problem.exact.as_ref().map(|ex| {
            let e: Vec<T> = xs.iter().zip(u).map(|(&x, &v)| ex(x, t) - v).collect();
            l2_norm(&e, h)
        })
    };
    let mut max_err = exact_error(&u, T::zero());

    let mut report = SolveReport::default();
    let mut history = opts.keep_history.then(|| vec![u.clone()]);
    let m = grid.m;
    let mut rhs = vec![T::zero(); m];
    let mut f = vec![T::zero(); m];

    for n in 1..=tgrid.n {
        let t_half = tgrid.half_step(n);
        for (fi, &x) in f.iter_mut().zip(&xs) {
            *fi = (problem.forcing)(x, t_half);
        }
        ops.b.apply(&u, &mut rhs);
        for (r, &fi) in rhs.iter_mut().zip(&f) {
            *r = *r + tau * fi;
        }

        let next = match &lu {
            Some(lu) => lu.solve(&rhs),
            None => {
                let x0 = match opts.initial_guess {
                    InitialGuess::Previous => u.clone(),
                    InitialGuess::Zero => vec![T::zero(); m],
                };
                let res = gmres(&ops.a, &ops.precond, &rhs, &x0, &opts.gmres);
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
            }
        };
        u = next;
        energy.record(n, &u, &f)?;
        if let Some(e) = exact_error(&u, tgrid.time(n)) {
            max_err = max_err.map(|m| Float::max(m, e));
        }
        if let Some(hist) = history.as_mut() {
            hist.push(u.clone());
        }
    }

    report.error = max_err.map(|e| e.as_f64());
    report.energy_ratio = Some(energy.worst_ratio());
    report.setup_seconds = setup_seconds;
    report.solve_seconds = solve_start.elapsed().as_secs_f64();
    Ok(Solution {
        final_state: u,
        history,
        report,
    })
}

/// `log2(E_{k-1} / E_k)` for successive refinements; `None` for the first entry.
pub fn convergence_rates(errors: &[f64]) -> Vec<Option<f64>> {
    errors
        .iter()
        .enumerate()
        .map(|(k, &e)| (k > 0).then(|| (errors[k - 1] / e).log2()))
        .collect()
}

/// Errors and rates for reports ordered from coarse to fine.
pub fn error_and_rates(reports: &[SolveReport]) -> Result<Vec<(f64, Option<f64>)>> {
    let errors = reports
        .iter()
        .map(|r| r.error.ok_or(OsfdeError::MissingExactSolution))
        .collect::<Result<Vec<_>>>()?;
    Ok(errors.iter().copied().zip(convergence_rates(&errors)).collect())
}
