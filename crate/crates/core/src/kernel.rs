//! Grünwald–Letnikov and weighted-and-shifted Grünwald (WSGD) weights.
//!
//! The shifted-by-one WSGD operator approximates the left Riemann–Liouville
//! derivative of order `alpha` at `x_i` as
//! `h^-alpha * sum_{k=0}^{i} w_k u(x_{i-k+1})`, second order in `h`.
//!
//! Its generating function has the closed form
//!
//! ```text
//! g(alpha, theta) = e^{-i theta} (1 - e^{i theta})^alpha (alpha/2 + (2 - alpha)/2 e^{i theta})
//! ```
//!
//! which follows from `sum_k g_k z^k = (1 - z)^alpha` and the two-term
//! weighting of the shifted sequences.

use num_complex::Complex;
use num_traits::Float;

use crate::error::{OsfdeError, Result};
use crate::Scalar;

/// Fractional order `alpha`, strictly inside `(1, 2)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct FractionalOrder(f64);

impl FractionalOrder {
    pub fn new(alpha: f64) -> Result<Self> {
        if alpha.is_finite() && alpha > 1.0 && alpha < 2.0 {
            Ok(Self(alpha))
        } else {
            Err(OsfdeError::InvalidOrder(alpha))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `|cos(alpha * pi / 2)|`, the minimum of `Re[-g] / |g|` over frequencies.
    pub fn symbol_ratio(self) -> f64 {
        (self.0 * std::f64::consts::FRAC_PI_2).cos().abs()
    }
}

impl TryFrom<f64> for FractionalOrder {
    type Error = OsfdeError;

    fn try_from(alpha: f64) -> Result<Self> {
        Self::new(alpha)
    }
}

/// Both weight sequences of length `n + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct WsgdKernel<T> {
    alpha: FractionalOrder,
    g: Vec<T>,
    w: Vec<T>,
}

impl<T: Scalar> WsgdKernel<T> {
    pub fn alpha(&self) -> FractionalOrder {
        self.alpha
    }

    /// Grünwald–Letnikov coefficients `g_0..g_n` of `(1 - z)^alpha`.
    pub fn g(&self) -> &[T] {
        &self.g
    }

    /// WSGD coefficients `w_0..w_n`.
    pub fn w(&self) -> &[T] {
        &self.w
    }

    pub fn len(&self) -> usize {
        self.w.len()
    }

    pub fn is_empty(&self) -> bool {
        self.w.is_empty()
    }
}

/// `g_0 = 1`, `g_k = (1 - (alpha + 1)/k) g_{k-1}`.
pub fn gl_weights<T: Scalar>(alpha: FractionalOrder, n: usize) -> Vec<T> {
    let a1 = T::lit(alpha.value() + 1.0);
    let mut g = Vec::with_capacity(n + 1);
    g.push(T::one());
    for k in 1..=n {
        let prev = g[k - 1];
        g.push((T::one() - a1 / T::from_usize_lossy(k)) * prev);
    }
    g
}

pub fn wsgd_weights<T: Scalar>(alpha: FractionalOrder, n: usize) -> WsgdKernel<T> {
    let g = gl_weights::<T>(alpha, n);
    let half_a = T::lit(alpha.value() / 2.0);
    let half_b = T::lit((2.0 - alpha.value()) / 2.0);
    let mut w = Vec::with_capacity(n + 1);
    w.push(half_a * g[0]);
    for k in 1..=n {
        w.push(half_a * g[k] + half_b * g[k - 1]);
    }
    WsgdKernel { alpha, g, w }
}

/// Closed-form generating function of the WSGD Toeplitz matrix.
pub fn symbol<T: Scalar>(alpha: FractionalOrder, theta: T) -> Complex<T> {
    let a = T::lit(alpha.value());
    let two = T::lit(2.0);
    let one = Complex::new(T::one(), T::zero());
    let z = Complex::from_polar(T::one(), theta);
    let base = one - z;
    if base.norm() == T::zero() {
        return Complex::new(T::zero(), T::zero());
    }
    let shift = Complex::from_polar(T::one(), -theta);
    let weight = Complex::new(a / two, T::zero()) + z * ((two - a) / two);
    shift * base.powf(a) * weight
}

/// Estimates `min_theta Re[-g(alpha, theta)] / |g(alpha, theta)|` on a uniform
/// grid of `grid_points` angles in `[-pi, pi]`.
///
/// Points where `|g| < 1e-14` are skipped (the ratio is 0/0 at `theta = 0`).
pub fn symbol_ratio_min<T: Scalar>(alpha: FractionalOrder, grid_points: usize) -> T {
    let grid_points = grid_points.max(2);
    let pi = T::lit(std::f64::consts::PI);
    let step = (pi + pi) / T::from_usize_lossy(grid_points - 1);
    let floor = T::lit(1e-14);
    let mut best = T::infinity();
    for k in 0..grid_points {
        let theta = -pi + step * T::from_usize_lossy(k);
        let g = symbol(alpha, theta);
        let mag = g.norm();
        if mag < floor {
            continue;
        }
        best = Float::min(best, -g.re / mag);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn order(a: f64) -> FractionalOrder {
        FractionalOrder::new(a).unwrap()
    }

    #[test]
    fn rejects_boundary_orders() {
        assert!(FractionalOrder::new(1.0).is_err());
        assert!(FractionalOrder::new(2.0).is_err());
        assert!(FractionalOrder::new(f64::NAN).is_err());
        assert!(FractionalOrder::new(1.0 + 1e-12).is_ok());
    }

    #[test]
    fn gl_weights_small_cases() {
        assert_eq!(gl_weights::<f64>(order(1.7), 0), vec![1.0]);
        let g = gl_weights::<f64>(order(1.5), 3);
        for (a, b) in g.iter().zip([1.0, -1.5, 0.375, 0.0625]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
        let g = gl_weights::<f64>(order(1.2), 2);
        for (a, b) in g.iter().zip([1.0, -1.2, 0.12]) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn wsgd_weights_small_cases() {
        let k = wsgd_weights::<f64>(order(1.5), 1);
        assert_abs_diff_eq!(k.w()[0], 0.75, epsilon = 1e-15);
        assert_abs_diff_eq!(k.w()[1], -0.875, epsilon = 1e-15);
        let k = wsgd_weights::<f64>(order(1.5), 3);
        assert_abs_diff_eq!(k.w()[2], -0.09375, epsilon = 1e-15);
        assert_abs_diff_eq!(k.w()[3], 0.140625, epsilon = 1e-15);
        for a in [1.05, 1.3, 1.99] {
            let k = wsgd_weights::<f64>(order(a), 1);
            assert_abs_diff_eq!(k.w()[0], a / 2.0, epsilon = 1e-15);
            assert_abs_diff_eq!(k.w()[1], (2.0 - a - a * a) / 2.0, epsilon = 1e-15);
            assert!(k.w()[0] > 0.0 && k.w()[1] < 0.0);
        }
    }

    #[test]
    fn weights_in_single_precision() {
        let w = wsgd_weights::<f32>(order(1.5), 3);
        assert!((w.w()[3] - 0.140625f32).abs() < 1e-6);
    }

    // Generalised binomial oracle: g_k = (-1)^k * alpha (alpha-1) ... (alpha-k+1) / k!.
    #[test]
    fn gl_weights_match_binomial_products() {
        for a in [1.1, 1.35, 1.5, 1.8, 1.95] {
            let g = gl_weights::<f64>(order(a), 20);
            for (k, gk) in g.iter().enumerate() {
                let mut num = 1.0;
                let mut fact = 1.0;
                for j in 0..k {
                    num *= a - j as f64;
                    fact *= (j + 1) as f64;
                }
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                let oracle = sign * num / fact;
                assert_abs_diff_eq!(*gk, oracle, epsilon = 1e-13 * oracle.abs().max(1.0));
            }
        }
    }

    #[test]
    fn partial_sums_decay_towards_zero() {
        for i in 1..10 {
            let a = 1.0 + i as f64 / 10.0;
            let k = wsgd_weights::<f64>(order(a), 10_000);
            let full: f64 = k.w().iter().sum();
            let half: f64 = k.w()[..=5_000].iter().sum();
            assert!(full.abs() < half.abs(), "alpha={a}: {full} vs {half}");
            assert!(full.abs() < 1e-3);
        }
    }

    #[test]
    fn symbol_special_values() {
        let z = symbol(order(1.5), 0.0f64);
        assert_eq!(z.norm(), 0.0);
        let p = symbol(order(1.5), std::f64::consts::PI);
        assert_abs_diff_eq!(p.re, -std::f64::consts::SQRT_2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.im, 0.0, epsilon = 1e-12);
    }

    // Truncated Fourier series oracle: sum_{k=0}^{n} w_k e^{i(k-1) theta}.
    fn truncated_symbol(w: &[f64], theta: f64) -> Complex<f64> {
        w.iter()
            .enumerate()
            .map(|(k, &wk)| Complex::from_polar(wk, (k as f64 - 1.0) * theta))
            .sum()
    }

    #[test]
    fn symbol_matches_truncated_series() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for a in [1.2, 1.5, 1.8] {
            let w = wsgd_weights::<f64>(order(a), 100_000);
            let mut thetas = vec![0.7];
            thetas.extend((0..33).map(|_| rng.gen_range(-3.1..3.1)));
            for theta in thetas {
                if f64::abs(theta) < 0.05 {
                    continue;
                }
                let s = symbol(order(a), theta);
                let t = truncated_symbol(w.w(), theta);
                assert!((s - t).norm() < 1e-8, "alpha={a} theta={theta}: {s} vs {t}");
            }
        }
    }

    #[test]
    fn ratio_min_matches_cosine() {
        for (a, expected) in [(1.5, 0.707_106_78), (1.2, 0.309_017), (1.8, 0.951_057)] {
            let r = symbol_ratio_min::<f64>(order(a), 100_000);
            assert_abs_diff_eq!(r, expected, epsilon = 1e-6);
            assert_abs_diff_eq!(r, order(a).symbol_ratio(), epsilon = 1e-6);
        }
    }
}
