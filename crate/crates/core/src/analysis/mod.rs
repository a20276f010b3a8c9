//! Dense oracles and spectral checks of the theory behind the scheme and
//! the preconditioners. Everything here is `f64` and size-guarded.

pub mod dense;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use dense::{
    dense_assemble_1d, dense_assemble_2d, dense_galpha, kron, plu_solve, DenseMatrix, LuFactors, DENSE_LIMIT,
};

use crate::error::{OsfdeError, Result};
use crate::kernel::FractionalOrder;

/// Size limit of [`check_negative_definite`].
pub const NEG_DEF_LIMIT: usize = 1024;
/// Size limit of [`field_of_values_bounds`].
pub const FOV_LIMIT: usize = 512;
/// Tolerance of the discrete second-difference convexity test.
pub const CONVEXITY_TOL: f64 = 1e-12;
/// `lambda_max(H(QA))` threshold for membership.
pub const MEMBERSHIP_TOL: f64 = 1e-10;

pub fn to_nalgebra(a: &DenseMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.dim(), a.dim(), a.as_slice())
}

fn sym_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// `lambda_max(G_alpha + G_alpha^T)`.
pub fn check_negative_definite(alpha: FractionalOrder, m: usize) -> Result<f64> {
    if m > NEG_DEF_LIMIT {
        return Err(OsfdeError::SizeGuard {
            size: m,
            limit: NEG_DEF_LIMIT,
        });
    }
    let g = to_nalgebra(&dense_galpha::<f64>(alpha, m)?);
    let s = &g + g.transpose();
    Ok(*sym_eigenvalues(s).last().expect("m >= 1"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convexity {
    /// Constant or affine: both convex and concave.
    Affine,
    Convex,
    Concave,
    Neither,
}

/// Classifies samples on a uniform grid by the sign of their second differences.
pub fn classify_convexity(samples: &[f64]) -> Convexity {
    let scale = samples.iter().fold(0.0f64, |s, v| s.max(v.abs())).max(1.0);
    let tol = CONVEXITY_TOL * scale;
    let (mut pos, mut neg) = (false, false);
    for w in samples.windows(3) {
        let dd = w[0] - 2.0 * w[1] + w[2];
        pos |= dd > tol;
        neg |= dd < -tol;
    }
    match (pos, neg) {
        (false, false) => Convexity::Affine,
        (true, false) => Convexity::Convex,
        (false, true) => Convexity::Concave,
        (true, true) => Convexity::Neither,
    }
}

/// Range data of one coefficient slice: `kappa = max` if concave, `min` if convex.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KappaData {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa: f64,
    pub nu: f64,
    pub convexity: Convexity,
}

impl KappaData {
    pub fn new(samples: &[f64], alpha: FractionalOrder) -> Self {
        let kappa_min = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let kappa_max = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let convexity = classify_convexity(samples);
        let kappa = match convexity {
            Convexity::Convex => kappa_min,
            _ => kappa_max,
        };
        let nu = std::f64::consts::SQRT_2 * (kappa_max - kappa_min) / alpha.symbol_ratio();
        Self {
            kappa_min,
            kappa_max,
            kappa,
            nu,
            convexity,
        }
    }

    pub fn lower(&self) -> f64 {
        self.kappa - self.nu
    }

    pub fn upper(&self) -> f64 {
        self.kappa + self.nu
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FovReport {
    pub bounds: KappaData,
    /// Extreme generalized eigenvalues of `(-DG - G^T D, -G - G^T)`.
    pub pencil_min: f64,
    pub pencil_max: f64,
    /// Extreme Rayleigh-quotient ratios over the random probes.
    pub probe_min: f64,
    pub probe_max: f64,
    pub probes: usize,
}

impl FovReport {
    pub fn holds(&self, slack: f64) -> bool {
        let (lo, hi) = (self.bounds.lower() - slack, self.bounds.upper() + slack);
        self.pencil_min >= lo && self.pencil_max <= hi && self.probe_min >= lo && self.probe_max <= hi
    }
}

/// Sandwich of the weighted symmetrized operator between multiples of the
/// unweighted one, checked by a dense generalized eigenvalue solve and by
/// random Rayleigh quotients.
pub fn field_of_values_bounds(d: &[f64], alpha: FractionalOrder, probes: usize, seed: u64) -> Result<FovReport> {
    let m = d.len();
    if m > FOV_LIMIT {
        return Err(OsfdeError::SizeGuard { size: m, limit: FOV_LIMIT });
    }
    let bounds = KappaData::new(d, alpha);
    if bounds.convexity == Convexity::Neither {
        return Err(OsfdeError::AssumptionViolated(
            "coefficient is neither convex nor concave on the grid".into(),
        ));
    }
    let g = to_nalgebra(&dense_galpha::<f64>(alpha, m)?);
    let dm = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(d));
    let hg = -(&g + g.transpose());
    let dg = &dm * &g;
    let hd = -(&dg + dg.transpose());

    let chol = nalgebra::Cholesky::new(hg.clone())
        .ok_or_else(|| OsfdeError::AssumptionViolated("-G - G^T is not positive definite".into()))?;
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or_else(|| OsfdeError::AssumptionViolated("singular Cholesky factor".into()))?;
    let mut c = &linv * &hd * linv.transpose();
    c = (&c + c.transpose()) * 0.5;
    let ev = sym_eigenvalues(c);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut pmin, mut pmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for _ in 0..probes {
        let u = nalgebra::DVector::from_fn(m, |_, _| rng.gen_range(-1.0..1.0));
        let num = u.dot(&(&hd * &u));
        let den = u.dot(&(&hg * &u));
        let r = num / den;
        pmin = pmin.min(r);
        pmax = pmax.max(r);
    }
    if probes == 0 {
        pmin = ev[0];
        pmax = ev[m - 1];
    }
    Ok(FovReport {
        bounds,
        pencil_min: ev[0],
        pencil_max: ev[m - 1],
        probe_min: pmin,
        probe_max: pmax,
        probes,
    })
}

fn guard_dense(n: usize) -> Result<()> {
    if n > DENSE_LIMIT {
        Err(OsfdeError::SizeGuard {
            size: n,
            limit: DENSE_LIMIT,
        })
    } else {
        Ok(())
    }
}

fn singular_values_of_ratio(a: DMatrix<f64>, p: DMatrix<f64>) -> Result<Vec<f64>> {
    // A P^{-1} = (P^{-T} A^T)^T
    let pt = p.transpose().lu();
    let x = pt
        .solve(&a.transpose())
        .ok_or(OsfdeError::Singular { column: 0 })?
        .transpose();
    let mut sv: Vec<f64> = x.singular_values().iter().copied().collect();
    sv.sort_by(f64::total_cmp);
    Ok(sv)
}

/// Singular values of `A P^{-1}` for `A = I - eta D G`, `P = I - eta mean(d) G`.
pub fn precond_spectrum_1d(alpha: FractionalOrder, d: &[f64], eta: f64) -> Result<Vec<f64>> {
    guard_dense(d.len())?;
    let mean = d.iter().sum::<f64>() / d.len() as f64;
    let a = to_nalgebra(&dense_assemble_1d(alpha, d, eta)?);
    let p = to_nalgebra(&dense_assemble_1d(alpha, &vec![mean; d.len()], eta)?);
    singular_values_of_ratio(a, p)
}

/// Singular values of `A P^{-1}` for the two-dimensional step matrix.
#[allow(clippy::too_many_arguments)]
pub fn precond_spectrum_2d(
    alpha: FractionalOrder,
    beta: FractionalOrder,
    m1: usize,
    m2: usize,
    d: &[f64],
    e: &[f64],
    eta_x: f64,
    eta_y: f64,
) -> Result<Vec<f64>> {
    let n = m1 * m2;
    guard_dense(n)?;
    let dm = d.iter().sum::<f64>() / n as f64;
    let em = e.iter().sum::<f64>() / n as f64;
    let a = to_nalgebra(&dense_assemble_2d(alpha, beta, m1, m2, d, e, eta_x, eta_y)?);
    let p = to_nalgebra(&dense_assemble_2d(
        alpha,
        beta,
        m1,
        m2,
        &vec![dm; n],
        &vec![em; n],
        eta_x,
        eta_y,
    )?);
    singular_values_of_ratio(a, p)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssumptionFlags {
    pub positive: bool,
    /// Convex or concave (per row and column in 2D).
    pub convexity: bool,
    /// Positive lower margin (`kappa - nu > 0`, `c_check > 0`).
    pub margin: bool,
}

impl AssumptionFlags {
    pub fn all(&self) -> bool {
        self.positive && self.convexity && self.margin
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport {
    pub kappa_min: f64,
    pub kappa_max: f64,
    pub kappa: f64,
    pub nu_alpha: f64,
    pub s_check: f64,
    pub s_hat: f64,
    pub flags: AssumptionFlags,
}

impl BoundsReport {
    /// Whether every squared singular value lies in `[s_check, s_hat]` up to a relative slack.
    pub fn contains(&self, singular_values: &[f64], slack: f64) -> bool {
        singular_values.iter().all(|s| {
            let s2 = s * s;
            s2 >= self.s_check * (1.0 - slack) && s2 <= self.s_hat * (1.0 + slack)
        })
    }
}

/// Interval for `Sigma^2(A P^{-1})` in one dimension. Uses the concave
/// formula when `d` is concave or affine and the convex one when convex.
pub fn theoretical_bounds_1d(d: &[f64], alpha: FractionalOrder) -> BoundsReport {
    let k = KappaData::new(d, alpha);
    let (kmin, kmax, nu) = (k.kappa_min, k.kappa_max, k.nu);
    let ratio2 = (kmin / kmax).powi(2);
    let (s_check, s_hat) = match k.convexity {
        Convexity::Convex => (((kmin - nu) / kmax).min(ratio2), ((kmin + nu) / kmin).max(1.0 / ratio2)),
        _ => (((kmax - nu) / kmax).min(ratio2), ((k.kappa + nu) / kmin).max(1.0 / ratio2)),
    };
    BoundsReport {
        kappa_min: kmin,
        kappa_max: kmax,
        kappa: k.kappa,
        nu_alpha: nu,
        s_check,
        s_hat,
        flags: AssumptionFlags {
            positive: kmin > 0.0,
            convexity: k.convexity != Convexity::Neither,
            margin: k.lower() > 0.0,
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundsReport2D {
    pub a_min: f64,
    pub a_max: f64,
    pub c_check: [f64; 2],
    pub c_hat: [f64; 2],
    pub s_check: f64,
    pub s_hat: f64,
    pub flags: AssumptionFlags,
}

impl BoundsReport2D {
    pub fn contains(&self, singular_values: &[f64], slack: f64) -> bool {
        singular_values.iter().all(|s| {
            let s2 = s * s;
            s2 >= self.s_check * (1.0 - slack) && s2 <= self.s_hat * (1.0 + slack)
        })
    }
}

/// Interval for `Sigma^2(A P^{-1})` when `d = nu_1 a`, `e = nu_2 a`; `a` is
/// sampled y-major on an `m1 x m2` grid.
pub fn theoretical_bounds_2d(
    a: &[f64],
    m1: usize,
    m2: usize,
    alpha: FractionalOrder,
    beta: FractionalOrder,
) -> Result<BoundsReport2D> {
    if a.len() != m1 * m2 {
        return Err(OsfdeError::DimensionMismatch {
            expected: m1 * m2,
            found: a.len(),
        });
    }
    let mut convexity = true;
    let mut line = |samples: &[f64], order: FractionalOrder| {
        let k = KappaData::new(samples, order);
        convexity &= k.convexity != Convexity::Neither;
        (k.lower(), k.upper())
    };
    let (mut c1_lo, mut c1_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for row in a.chunks(m1) {
        let (lo, hi) = line(row, alpha);
        c1_lo = c1_lo.min(lo);
        c1_hi = c1_hi.max(hi);
    }
    let at = crate::scheme2d::xy_permute(a, m1, m2);
    let (mut c2_lo, mut c2_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for col in at.chunks(m2) {
        let (lo, hi) = line(col, beta);
        c2_lo = c2_lo.min(lo);
        c2_hi = c2_hi.max(hi);
    }
    let a_min = a.iter().copied().fold(f64::INFINITY, f64::min);
    let a_max = a.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let s_check = (c1_lo / a_max).min(c2_lo / a_max).min((a_min / a_max).powi(2));
    let s_hat = (c1_hi / a_min).max(c2_hi / a_min).max((a_max / a_min).powi(2));
    Ok(BoundsReport2D {
        a_min,
        a_max,
        c_check: [c1_lo, c2_lo],
        c_hat: [c1_hi, c2_hi],
        s_check,
        s_hat,
        flags: AssumptionFlags {
            positive: a_min > 0.0,
            convexity,
            margin: c1_lo > 0.0 && c2_lo > 0.0,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MembershipCertificate {
    pub label: String,
    /// `lambda_max(H(QA))` for the spatial operator `A`.
    pub lambda_max: f64,
    /// `max(q) / min(q)`.
    pub cond_q: f64,
    pub member: bool,
}

/// Spatial operator `D (I (x) G_alpha) / (2 h1^alpha) + E (G_beta (x) I) / (2 h2^beta)`.
#[allow(clippy::too_many_arguments)]
pub fn spatial_operator_2d(
    alpha: FractionalOrder,
    beta: FractionalOrder,
    m1: usize,
    m2: usize,
    h1: f64,
    h2: f64,
    d: &[f64],
    e: &[f64],
) -> Result<DMatrix<f64>> {
    let cx = 1.0 / (2.0 * h1.powf(alpha.value()));
    let cy = 1.0 / (2.0 * h2.powf(beta.value()));
    // I - (-cx) D Gx - (-cy) E Gy, minus the identity
    let m = dense_assemble_2d(alpha, beta, m1, m2, d, e, -cx, -cy)?;
    Ok(to_nalgebra(&m) - DMatrix::identity(m1 * m2, m1 * m2))
}

/// Checks `Q > 0` and `H(QA) <= 0` for a diagonal `Q`.
pub fn certify_q(label: &str, spatial: &DMatrix<f64>, q: &[f64]) -> Result<MembershipCertificate> {
    let n = spatial.nrows();
    guard_dense(n)?;
    if q.len() != n {
        return Err(OsfdeError::DimensionMismatch { expected: n, found: q.len() });
    }
    let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
    let qmax = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut qa = spatial.clone();
    for (i, mut row) in qa.row_iter_mut().enumerate() {
        row *= q[i];
    }
    let h = (&qa + qa.transpose()) * 0.5;
    let lambda_max = *sym_eigenvalues(h).last().unwrap_or(&0.0);
    Ok(MembershipCertificate {
        label: label.to_string(),
        lambda_max,
        cond_q: qmax / qmin,
        member: qmin > 0.0 && lambda_max <= MEMBERSHIP_TOL,
    })
}
