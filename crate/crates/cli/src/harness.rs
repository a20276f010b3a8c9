//! Experiment orchestration. Ladder cells run in a rayon pool; rows come back
//! in ladder order.

use std::sync::Arc;

use log::{info, warn};
use osfde::analysis::{
    certify_q, field_of_values_bounds, precond_spectrum_1d, precond_spectrum_2d, spatial_operator_2d,
    theoretical_bounds_1d, theoretical_bounds_2d, FOV_LIMIT,
};
use osfde::problems::{example1, example2, zero_1d};
use osfde::scheme2d::MultigridOptions;
use osfde::{
    advance, advance_2d, FractionalOrder, GmresOptions, Grid1D, Grid2D, LinearSolver, Problem1D, Problem2D,
    SolveReport, SolverOptions, SolverOptions2D, StabilityWeight, TimeGrid,
};
use rayon::prelude::*;

use crate::config::{interior_nodes, time_steps, ExperimentConfig, ProblemId, Refine, SolverKind, StabilityChoice};
use crate::emit::{ResultRow, ResultTable, SpectralRow, SpectralTable};
use crate::error::{HarnessError, Result};

/// Grid size used to certify a two-dimensional energy weight.
pub const CERTIFY_SIZE: usize = 15;
const FOV_PROBES: usize = 64;
const SPECTRAL_SLACK: f64 = 1e-8;
const FOV_SLACK: f64 = 1e-10;

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub row: ResultRow,
    pub report: SolveReport,
    pub final_state: Vec<f64>,
}

fn order(v: f64) -> Result<FractionalOrder> {
    Ok(FractionalOrder::new(v)?)
}

pub fn problem_1d(cfg: &ExperimentConfig) -> Result<Problem1D<f64>> {
    let alpha = order(cfg.alpha)?;
    Ok(match &cfg.problem {
        ProblemId::Example1 => example1(alpha),
        ProblemId::Zero => zero_1d(),
        ProblemId::Custom(c) => {
            let d = Arc::new(c.diffusion.clone());
            let u0 = Arc::new(c.initial.clone());
            let src = c.source;
            Problem1D {
                x_left: c.x_left,
                x_right: c.x_right,
                t_end: c.t_end,
                diffusion: Arc::new(move |x| d.eval(x)),
                forcing: Arc::new(move |_, _| src),
                initial: Arc::new(move |x| u0.eval(x)),
                exact: None,
            }
        }
        ProblemId::Example2 => return Err(HarnessError::Config("example2 is two-dimensional".into())),
    })
}

pub fn problem_2d(cfg: &ExperimentConfig) -> Result<Problem2D<f64>> {
    match cfg.problem {
        ProblemId::Example2 => {
            let beta = cfg.beta.ok_or_else(|| HarnessError::Config("example2 needs beta".into()))?;
            Ok(example2(order(cfg.alpha)?, order(beta)?))
        }
        _ => Err(HarnessError::Config("problem is one-dimensional".into())),
    }
}

/// `(h_exp, tau_exp)` pairs, the refinement axis innermost.
pub fn cells(cfg: &ExperimentConfig) -> Vec<(i32, i32)> {
    match cfg.refine_axis() {
        Refine::Space => cfg
            .tau_exps
            .iter()
            .flat_map(|&t| cfg.h_exps.iter().map(move |&h| (h, t)))
            .collect(),
        Refine::Time => cfg
            .h_exps
            .iter()
            .flat_map(|&h| cfg.tau_exps.iter().map(move |&t| (h, t)))
            .collect(),
    }
}

fn gmres_options(cfg: &ExperimentConfig) -> GmresOptions<f64> {
    GmresOptions {
        rel_tol: cfg.gmres_tol,
        baseline: cfg.baseline,
        max_iter: cfg.gmres_max_iter,
        check_orthogonality: false,
    }
}

fn base_options(cfg: &ExperimentConfig) -> SolverOptions<f64> {
    SolverOptions {
        solver: match cfg.solver {
            SolverKind::PgmresT => LinearSolver::PgmresT,
            SolverKind::Plu => LinearSolver::Plu,
        },
        gmres: gmres_options(cfg),
        ..Default::default()
    }
}

/// First of `I`, `D^-1`, `E^-1` whose weighted spatial operator has a
/// negative semidefinite symmetric part on the coarse certification grid.
pub fn certified_weight(problem: &Problem2D<f64>) -> Result<Option<StabilityChoice>> {
    let grid = problem.grid(CERTIFY_SIZE, CERTIFY_SIZE)?;
    let (d, e) = problem.sample_coefficients(&grid)?;
    let spatial = spatial_operator_2d(
        problem.alpha,
        problem.beta,
        grid.m1,
        grid.m2,
        grid.h1(),
        grid.h2(),
        &d,
        &e,
    )?;
    let candidates = [
        (StabilityChoice::Identity, vec![1.0; d.len()]),
        (StabilityChoice::InverseD, d.iter().map(|v| 1.0 / v).collect()),
        (StabilityChoice::InverseE, e.iter().map(|v| 1.0 / v).collect()),
    ];
    for (choice, q) in candidates {
        if q.iter().any(|v| !v.is_finite()) {
            continue;
        }
        let cert = certify_q(&format!("{choice:?}"), &spatial, &q)?;
        info!("weight {:?}: lambda_max = {:e}, member = {}", choice, cert.lambda_max, cert.member);
        if cert.member {
            return Ok(Some(choice));
        }
    }
    Ok(None)
}

fn stability_weight(cfg: &ExperimentConfig, problem: &Problem2D<f64>) -> Result<StabilityWeight<f64>> {
    let choice = match cfg.stability {
        StabilityChoice::Auto => certified_weight(problem)?.unwrap_or_else(|| {
            warn!("no candidate energy weight certified; stability check disabled");
            StabilityChoice::None
        }),
        c => c,
    };
    Ok(match choice {
        StabilityChoice::None | StabilityChoice::Auto => StabilityWeight::None,
        StabilityChoice::Identity => StabilityWeight::Identity,
        StabilityChoice::InverseD => StabilityWeight::InverseD,
        StabilityChoice::InverseE => StabilityWeight::InverseE,
    })
}

/// Runs a single `(h, tau)` cell; `rate` is left empty.
pub fn solve_cell(cfg: &ExperimentConfig, h_exp: i32, tau_exp: i32) -> Result<CellOutcome> {
    let m = interior_nodes(cfg.extent(), h_exp)
        .ok_or_else(|| HarnessError::Config(format!("h = 2^{h_exp} does not fit the domain")))?;
    let n = time_steps(cfg.t_end(), tau_exp)
        .ok_or_else(|| HarnessError::Config(format!("tau = 2^{tau_exp} does not fit [0, T]")))?;
    let tgrid = TimeGrid::new(cfg.t_end(), n)?;
    let solution = if cfg.problem.is_2d() {
        let problem = problem_2d(cfg)?;
        let grid: Grid2D<f64> = problem.grid(m, m)?;
        let opts = SolverOptions2D {
            base: base_options(cfg),
            multigrid: MultigridOptions {
                cycles: cfg.mg_cycles,
                ..Default::default()
            },
            stability_weight: stability_weight(cfg, &problem)?,
        };
        advance_2d(&problem, &grid, &tgrid, &opts)?
    } else {
        let problem = problem_1d(cfg)?;
        let grid: Grid1D<f64> = problem.grid(m)?;
        advance(&problem, &grid, &tgrid, order(cfg.alpha)?, &base_options(cfg))?
    };
    let report = solution.report;
    info!(
        "h=2^{h_exp} tau=2^{tau_exp}: iter {:.2}, error {:?}, {:.2}s",
        report.mean_iterations(),
        report.error,
        report.total_seconds()
    );
    let row = ResultRow {
        alpha: cfg.alpha,
        beta: cfg.beta,
        h_exp,
        tau_exp,
        solver: cfg.solver.as_str().to_string(),
        iter_mean: (cfg.solver == SolverKind::PgmresT).then(|| report.mean_iterations()),
        cpu_s: report.total_seconds(),
        error: report.error,
        rate: None,
    };
    Ok(CellOutcome {
        row,
        report,
        final_state: solution.final_state,
    })
}

/// Runs `f` in a pool of `threads` workers, or the global pool.
pub fn in_pool<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> Result<R> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// All ladder cells, in [`cells`] order.
pub fn run_cells(cfg: &ExperimentConfig) -> Result<Vec<CellOutcome>> {
    let list = cells(cfg);
    in_pool(cfg.threads, || {
        list.par_iter()
            .map(|&(h, t)| solve_cell(cfg, h, t))
            .collect::<Result<Vec<_>>>()
    })?
}

/// Fills `rate` from the previous row along the refinement axis.
pub fn attach_rates(rows: &mut [ResultRow], axis: Refine) {
    for k in 1..rows.len() {
        let (prev, cur) = (&rows[k - 1], &rows[k]);
        let (same_group, step) = match axis {
            Refine::Space => (prev.tau_exp == cur.tau_exp, prev.h_exp - cur.h_exp),
            Refine::Time => (prev.h_exp == cur.h_exp, prev.tau_exp - cur.tau_exp),
        };
        let rate = match (same_group && step != 0, prev.error, cur.error) {
            (true, Some(e0), Some(e1)) if e0 > 0.0 && e1 > 0.0 => Some((e0 / e1).log2() / step as f64),
            _ => None,
        };
        rows[k].rate = rate;
    }
}

pub fn run_convergence(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if !cfg.problem.has_exact() {
        return Err(HarnessError::Config("convergence needs a problem with an exact solution".into()));
    }
    let mut rows: Vec<ResultRow> = run_cells(cfg)?.into_iter().map(|c| c.row).collect();
    attach_rates(&mut rows, cfg.refine_axis());
    Ok(ResultTable { rows })
}

pub fn run_precond_bench(cfg: &ExperimentConfig) -> Result<ResultTable> {
    if cfg.solver != SolverKind::PgmresT {
        return Err(HarnessError::Config("precond-bench requires solver = pgmres-t".into()));
    }
    Ok(ResultTable {
        rows: run_cells(cfg)?.into_iter().map(|c| c.row).collect(),
    })
}

fn spectral_cell(cfg: &ExperimentConfig, h_exp: i32, tau_exp: i32) -> Result<SpectralRow> {
    let h = 2f64.powi(h_exp);
    let tau = 2f64.powi(tau_exp);
    let m = interior_nodes(cfg.extent(), h_exp)
        .ok_or_else(|| HarnessError::Config(format!("h = 2^{h_exp} does not fit the domain")))?;
    let sq = |sv: &[f64]| {
        let lo = sv.iter().fold(f64::INFINITY, |a, s| a.min(s * s));
        let hi = sv.iter().fold(0.0f64, |a, s| a.max(s * s));
        (lo, hi)
    };
    if cfg.problem.is_2d() {
        let problem = problem_2d(cfg)?;
        let grid = problem.grid(m, m)?;
        let (d, e) = problem.sample_coefficients(&grid)?;
        let (a, b) = (problem.alpha, problem.beta);
        let eta_x = tau / (2.0 * h.powf(a.value()));
        let eta_y = tau / (2.0 * h.powf(b.value()));
        let sv = precond_spectrum_2d(a, b, m, m, &d, &e, eta_x, eta_y)?;
        let (lo, hi) = sq(&sv);
        // bounds apply when d and e are both multiples of one function
        let ratio = e[0] / d[0];
        let proportional = d.iter().zip(&e).all(|(dv, ev)| (ev - ratio * dv).abs() <= 1e-12 * ev.abs().max(1.0));
        let bounds = if proportional {
            Some(theoretical_bounds_2d(&d, m, m, a, b)?)
        } else {
            None
        };
        Ok(SpectralRow {
            alpha: cfg.alpha,
            beta: cfg.beta,
            h_exp,
            tau_exp,
            s_check: bounds.as_ref().map(|b| b.s_check),
            s_hat: bounds.as_ref().map(|b| b.s_hat),
            sigma2_min: lo,
            sigma2_max: hi,
            contained: bounds.as_ref().map(|b| b.contains(&sv, SPECTRAL_SLACK)),
            fov_holds: None,
            assumptions_hold: bounds.map(|b| b.flags.all()).unwrap_or(false),
        })
    } else {
        let problem = problem_1d(cfg)?;
        let grid = problem.grid(m)?;
        let d = problem.sample_diffusion(&grid)?;
        let alpha = order(cfg.alpha)?;
        let eta = tau / (2.0 * h.powf(cfg.alpha));
        let sv = precond_spectrum_1d(alpha, &d, eta)?;
        let (lo, hi) = sq(&sv);
        let bounds = theoretical_bounds_1d(&d, alpha);
        let fov = if m <= FOV_LIMIT {
            Some(field_of_values_bounds(&d, alpha, FOV_PROBES, cfg.seed)?.holds(FOV_SLACK))
        } else {
            None
        };
        Ok(SpectralRow {
            alpha: cfg.alpha,
            beta: None,
            h_exp,
            tau_exp,
            s_check: Some(bounds.s_check),
            s_hat: Some(bounds.s_hat),
            sigma2_min: lo,
            sigma2_max: hi,
            contained: Some(bounds.contains(&sv, SPECTRAL_SLACK)),
            fov_holds: fov,
            assumptions_hold: bounds.flags.all(),
        })
    }
}

/// Dense spectral study of `A P^-1` over the ladder.
pub fn run_spectral(cfg: &ExperimentConfig) -> Result<SpectralTable> {
    let list = cells(cfg);
    let rows = in_pool(cfg.threads, || {
        list.par_iter()
            .map(|&(h, t)| spectral_cell(cfg, h, t))
            .collect::<Result<Vec<_>>>()
    })??;
    Ok(SpectralTable { rows })
}

impl SpectralTable {
    pub fn assumptions_hold(&self) -> bool {
        self.rows.iter().all(|r| r.assumptions_hold)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ConfigBuilder;

    fn cfg(text: &str) -> ExperimentConfig {
        let mut b = ConfigBuilder::new();
        b.read_str(text, "test").unwrap();
        b.finish().unwrap()
    }

    fn row(h: i32, t: i32, e: Option<f64>) -> ResultRow {
        ResultRow {
            alpha: 1.5,
            beta: None,
            h_exp: h,
            tau_exp: t,
            solver: "plu".into(),
            iter_mean: None,
            cpu_s: 0.0,
            error: e,
            rate: None,
        }
    }

    #[test]
    fn cell_order_follows_refinement_axis() {
        let c = cfg("h_exp = -3..-4\ntau_exp = -2..-3");
        assert_eq!(cells(&c), vec![(-3, -2), (-4, -2), (-3, -3), (-4, -3)]);
        let c = cfg("h_exp = -3..-4\ntau_exp = -2..-3\nrefine = tau");
        assert_eq!(cells(&c), vec![(-3, -2), (-3, -3), (-4, -2), (-4, -3)]);
    }

    #[test]
    fn rates_only_with_predecessor() {
        let mut rows = vec![
            row(-3, -2, Some(4e-3)),
            row(-4, -2, Some(1e-3)),
            row(-3, -3, Some(2e-3)),
            row(-5, -3, Some(1.25e-4)),
            row(-6, -3, None),
        ];
        attach_rates(&mut rows, Refine::Space);
        assert_eq!(rows[0].rate, None);
        assert!((rows[1].rate.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rows[2].rate, None);
        assert!((rows[3].rate.unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(rows[4].rate, None);
    }

    #[test]
    fn zero_problem_has_zero_error() {
        let c = cfg("problem = zero\nh_exp = -4..-5\ntau_exp = -3");
        let t = run_convergence(&c).unwrap();
        assert_eq!(t.rows.len(), 2);
        for r in &t.rows {
            assert_eq!(r.error, Some(0.0));
            assert_eq!(r.rate, None);
        }
    }

    #[test]
    fn convergence_requires_exact_solution() {
        let c = cfg("problem = custom\ndiffusion = 0:1, 1:2");
        assert!(matches!(run_convergence(&c), Err(HarnessError::Config(_))));
    }

    #[test]
    fn bench_requires_pgmres() {
        let c = cfg("solver = plu");
        assert!(matches!(run_precond_bench(&c), Err(HarnessError::Config(_))));
    }

    #[test]
    fn constant_coefficients_need_one_iteration() {
        let c = cfg("problem = custom\ndiffusion = 0:1.7, 1:1.7\nsource = 1\nh_exp = -5..-7\ntau_exp = -4");
        let t = run_precond_bench(&c).unwrap();
        for r in &t.rows {
            assert!(r.iter_mean.unwrap() <= 1.0, "{r:?}");
        }
    }

    #[test]
    fn results_are_reproducible() {
        let c = cfg("alpha = 1.8\nh_exp = -4..-6\ntau_exp = -5\nthreads = 2");
        let strip = |t: ResultTable| -> Vec<ResultRow> {
            t.rows.into_iter().map(|r| ResultRow { cpu_s: 0.0, ..r }).collect()
        };
        let a = strip(run_convergence(&c).unwrap());
        let b = strip(run_convergence(&c).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn spectral_rows_for_example1() {
        let c = cfg("alpha = 1.5\nh_exp = -5\ntau_exp = -5");
        let t = run_spectral(&c).unwrap();
        let r = &t.rows[0];
        assert!(r.sigma2_min > 0.0 && r.sigma2_max >= r.sigma2_min);
        // the diffusion of example 1 varies too much for the margin assumption
        assert!(!t.assumptions_hold());
        assert_eq!(r.fov_holds, Some(true));
    }
}
