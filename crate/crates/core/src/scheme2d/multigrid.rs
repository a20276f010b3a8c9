//! Geometric V-cycle for `P = I + mean(d) B_x + mean(e) B_y`.
//!
//! Pre-smoothing is x-line block Jacobi, post-smoothing y-line block Jacobi.
//! By default the line blocks are the true diagonal blocks of `P`, e.g.
//! `T_x = (1 - mean(e) eta_y w_1) I + mean(d) B_x`, which keeps the smoother
//! effective as the mesh is refined; [`LineBlocks::Unshifted`] drops the
//! shift. Both blocks are Toeplitz and applied through Gohberg–Semencul. Coarse operators are
//! rediscretized on the doubled mesh, transfers are bilinear interpolation
//! and full weighting. A preconditioner application runs a fixed number of
//! cycles from a zero guess, so it is a fixed linear map.

use rayon::prelude::*;

use super::{apply_kron_x, apply_kron_y, xy_permute, xy_unpermute, Grid2D};
use crate::error::Result;
use crate::kernel::FractionalOrder;
use crate::krylov::{gmres, GmresOptions, Identity, LinearOperator};
use crate::scheme1d::assemble_galpha;
use crate::toeplitz::{gs_build, GsInverse, ToeplitzOperator};
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LineBlocks {
    /// Diagonal blocks of `P`, including the other direction's diagonal.
    #[default]
    Diagonal,
    /// `I + mean(d) B_x` and `I + mean(e) B_y`.
    Unshifted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultigridOptions<T> {
    pub line_blocks: LineBlocks,
    /// V-cycles per preconditioner application (stationary iteration from zero).
    pub cycles: usize,
    pub pre_smooth: usize,
    pub post_smooth: usize,
    /// Coarsening stops once a level has at most this many unknowns.
    pub coarsest_max: usize,
    pub coarse_tol: T,
    pub coarse_max_iter: usize,
}

impl<T: Scalar> Default for MultigridOptions<T> {
    fn default() -> Self {
        Self {
            line_blocks: LineBlocks::Diagonal,
            cycles: 1,
            pre_smooth: 1,
            post_smooth: 1,
            coarsest_max: 49,
            coarse_tol: T::lit(1e-10),
            coarse_max_iter: 500,
        }
    }
}

struct Level<T> {
    m1: usize,
    m2: usize,
    /// `mean(d) eta_x` and `mean(e) eta_y` on this mesh.
    sx: T,
    sy: T,
    gx: ToeplitzOperator<T>,
    gy: ToeplitzOperator<T>,
    tx_inv: GsInverse<T>,
    ty_inv: GsInverse<T>,
}

impl<T: Scalar> Level<T> {
    fn len(&self) -> usize {
        self.m1 * self.m2
    }

    /// `y <- P x`.
    fn apply_p(&self, x: &[T], y: &mut [T]) {
        let mut gy = vec![T::zero(); x.len()];
        apply_kron_x(&self.gx, self.m1, x, y);
        apply_kron_y(&self.gy, self.m1, self.m2, x, &mut gy);
        y.par_iter_mut()
            .zip(gy.par_iter())
            .zip(x.par_iter())
            .for_each(|((yk, &g), &xk)| *yk = xk - self.sx * *yk - self.sy * g);
    }

    fn residual(&self, z: &[T], x: &[T]) -> Vec<T> {
        let mut px = vec![T::zero(); x.len()];
        self.apply_p(x, &mut px);
        z.iter().zip(&px).map(|(&a, &b)| a - b).collect()
    }

    fn tx_solve(&self, r: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); r.len()];
        out.par_chunks_mut(self.m1)
            .zip(r.par_chunks(self.m1))
            .for_each(|(o, b)| self.tx_inv.apply_into(b, o));
        out
    }

    fn ty_solve(&self, r: &[T]) -> Vec<T> {
        let v = xy_permute(r, self.m1, self.m2);
        let mut w = vec![T::zero(); v.len()];
        w.par_chunks_mut(self.m2)
            .zip(v.par_chunks(self.m2))
            .for_each(|(o, b)| self.ty_inv.apply_into(b, o));
        xy_unpermute(&w, self.m1, self.m2)
    }
}

impl<T: Scalar> LinearOperator<T> for Level<T> {
    fn dim(&self) -> usize {
        self.len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_p(x, y);
    }
}

/// Multigrid approximation of `P^{-1}`.
pub struct Precond2D<T> {
    levels: Vec<Level<T>>,
    opts: MultigridOptions<T>,
}

impl<T: Scalar> Precond2D<T> {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        alpha: FractionalOrder,
        beta: FractionalOrder,
        grid: &Grid2D<T>,
        tau: T,
        d_mean: T,
        e_mean: T,
        setup_tol: T,
        opts: &MultigridOptions<T>,
    ) -> Result<Self> {
        let two = T::lit(2.0);
        let (mut m1, mut m2) = (grid.m1, grid.m2);
        let (mut h1, mut h2) = (grid.h1(), grid.h2());
        let mut levels = Vec::new();
        loop {
            let sx = d_mean * tau / (two * h1.powf(T::lit(alpha.value())));
            let sy = e_mean * tau / (two * h2.powf(T::lit(beta.value())));
            let gx = assemble_galpha::<T>(alpha, m1);
            let gy = assemble_galpha::<T>(beta, m2);
            let (shift_x, shift_y) = match opts.line_blocks {
                LineBlocks::Diagonal => (-sy * gy.entry(0, 0), -sx * gx.entry(0, 0)),
                LineBlocks::Unshifted => (T::zero(), T::zero()),
            };
            let tx_inv = gs_build(&gx.affine(T::one() + shift_x, -sx), setup_tol)?;
            let ty_inv = gs_build(&gy.affine(T::one() + shift_y, -sy), setup_tol)?;
            levels.push(Level {
                m1,
                m2,
                sx,
                sy,
                gx,
                gy,
                tx_inv,
                ty_inv,
            });
            let coarsenable = m1 % 2 == 1 && m2 % 2 == 1 && m1 >= 3 && m2 >= 3;
            if m1 * m2 <= opts.coarsest_max || !coarsenable {
                break;
            }
            m1 = (m1 - 1) / 2;
            m2 = (m2 - 1) / 2;
            h1 = h1 * two;
            h2 = h2 * two;
        }
        if levels.last().map_or(0, Level::len) > opts.coarsest_max {
            log::warn!(
                "grid {}x{} cannot be coarsened below {} unknowns; coarse level solved iteratively",
                grid.m1,
                grid.m2,
                levels.last().map_or(0, Level::len)
            );
        }
        Ok(Self {
            levels,
            opts: opts.clone(),
        })
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    /// `(m1, m2)` per level, finest first.
    pub fn level_sizes(&self) -> Vec<(usize, usize)> {
        self.levels.iter().map(|l| (l.m1, l.m2)).collect()
    }

    /// Applies the exact `P` of the finest level.
    pub fn apply_p(&self, x: &[T], y: &mut [T]) {
        self.levels[0].apply_p(x, y);
    }

    fn coarse_solve(&self, level: &Level<T>, z: &[T]) -> Vec<T> {
        let gopts = GmresOptions::with_tol(self.opts.coarse_tol, self.opts.coarse_max_iter);
        let x0 = vec![T::zero(); z.len()];
        let res = if level.len() <= self.opts.coarsest_max {
            gmres(level, &Identity(level.len()), z, &x0, &gopts)
        } else {
            let tx = crate::krylov::FnOperator::new(level.len(), |r: &[T], o: &mut [T]| {
                o.copy_from_slice(&level.tx_solve(r))
            });
            gmres(level, &tx, z, &x0, &gopts)
        };
        if !res.converged {
            log::debug!("coarse solve stopped at residual {:e}", res.true_residual);
        }
        res.solution
    }

    fn cycle(&self, l: usize, z: &[T]) -> Vec<T> {
        let level = &self.levels[l];
        if l + 1 == self.levels.len() {
            return self.coarse_solve(level, z);
        }
        let mut x = vec![T::zero(); z.len()];
        for _ in 0..self.opts.pre_smooth {
            let r = level.residual(z, &x);
            add(&mut x, &level.tx_solve(&r));
        }
        let coarse = &self.levels[l + 1];
        let r = level.residual(z, &x);
        let rc = restrict_2d(&r, coarse.m1, coarse.m2);
        let ec = self.cycle(l + 1, &rc);
        add(&mut x, &prolong_2d(&ec, coarse.m1, coarse.m2));
        for _ in 0..self.opts.post_smooth {
            let r = level.residual(z, &x);
            add(&mut x, &level.ty_solve(&r));
        }
        x
    }
}

impl<T: Scalar> LinearOperator<T> for Precond2D<T> {
    fn dim(&self) -> usize {
        self.levels[0].len()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let mut out = self.cycle(0, x);
        for _ in 1..self.opts.cycles {
            let r = self.levels[0].residual(x, &out);
            add(&mut out, &self.cycle(0, &r));
        }
        y.copy_from_slice(&out);
    }
}

fn add<T: Scalar>(x: &mut [T], d: &[T]) {
    for (a, &b) in x.iter_mut().zip(d) {
        *a = *a + b;
    }
}

/// Linear interpolation from `mc` coarse nodes to `2 mc + 1` fine nodes.
fn prolong_1d<T: Scalar>(c: &[T], f: &mut [T]) {
    let mc = c.len();
    let half = T::lit(0.5);
    for i in 0..=mc {
        let left = if i > 0 { c[i - 1] } else { T::zero() };
        let right = if i < mc { c[i] } else { T::zero() };
        f[2 * i] = half * (left + right);
        if i < mc {
            f[2 * i + 1] = c[i];
        }
    }
}

/// Transpose of [`prolong_1d`].
fn prolong_1d_t<T: Scalar>(f: &[T], c: &mut [T]) {
    let half = T::lit(0.5);
    for (i, ci) in c.iter_mut().enumerate() {
        *ci = f[2 * i + 1] + half * (f[2 * i] + f[2 * i + 2]);
    }
}

/// Bilinear interpolation of a y-major coarse field of size `mc1 x mc2`.
pub fn prolong_2d<T: Scalar>(c: &[T], mc1: usize, mc2: usize) -> Vec<T> {
    let (m1, m2) = (2 * mc1 + 1, 2 * mc2 + 1);
    let mut rows = vec![T::zero(); m1 * mc2];
    rows.par_chunks_mut(m1)
        .zip(c.par_chunks(mc1))
        .for_each(|(f, c)| prolong_1d(c, f));
    let cols = xy_permute(&rows, m1, mc2);
    let mut fine_t = vec![T::zero(); m1 * m2];
    fine_t
        .par_chunks_mut(m2)
        .zip(cols.par_chunks(mc2))
        .for_each(|(f, c)| prolong_1d(c, f));
    xy_unpermute(&fine_t, m1, m2)
}

/// Full weighting onto the `mc1 x mc2` coarse grid (`1/4` times the
/// transpose of [`prolong_2d`]).
pub fn restrict_2d<T: Scalar>(f: &[T], mc1: usize, mc2: usize) -> Vec<T> {
    let (m1, m2) = (2 * mc1 + 1, 2 * mc2 + 1);
    assert_eq!(f.len(), m1 * m2);
    let ft = xy_permute(f, m1, m2);
    let mut cols = vec![T::zero(); m1 * mc2];
    cols.par_chunks_mut(mc2)
        .zip(ft.par_chunks(m2))
        .for_each(|(c, f)| prolong_1d_t(f, c));
    let rows = xy_unpermute(&cols, m1, mc2);
    let quarter = T::lit(0.25);
    let mut out = vec![T::zero(); mc1 * mc2];
    out.par_chunks_mut(mc1)
        .zip(rows.par_chunks(m1))
        .for_each(|(c, f)| {
            prolong_1d_t(f, c);
            c.iter_mut().for_each(|v| *v = *v * quarter);
        });
    out
}
