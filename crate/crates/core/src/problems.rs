//! Manufactured test problems with closed-form solutions.

use std::f64::consts::PI;
use std::sync::Arc;

use statrs::function::gamma::gamma;

use crate::kernel::FractionalOrder;
use crate::scheme1d::Problem1D;
use crate::scheme2d::Problem2D;
use crate::Scalar;

fn binomial(n: u64, k: u64) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn factorial(n: u64) -> f64 {
    (1..=n).map(|v| v as f64).product()
}

/// Left Riemann–Liouville derivative of a polynomial `sum_k a_k x^k`,
/// returned as `(coefficient, exponent)` pairs `a_k k! / Gamma(k + 1 - alpha)`, `k - alpha`.
fn rl_terms(poly: &[(u64, f64)], alpha: f64) -> Vec<(f64, f64)> {
    poly.iter()
        .map(|&(k, a)| (a * factorial(k) / gamma(k as f64 + 1.0 - alpha), k as f64 - alpha))
        .collect()
}

fn eval_terms<T: Scalar>(terms: &[(f64, f64)], x: T) -> T {
    terms
        .iter()
        .fold(T::zero(), |s, &(c, p)| s + T::lit(c) * x.powf(T::lit(p)))
}

/// `u = 64 x^3 (1-x)^3 t^3` on `[0, 1]` with `d(x) = cos(pi x / 2) + 0.1`.
pub fn example1<T: Scalar>(alpha: FractionalOrder) -> Problem1D<T> {
    // x^3 (1-x)^3 = sum_{k=3}^{6} C(3, k-3) (-1)^{k-3} x^k
    let poly: Vec<(u64, f64)> = (3..=6)
        .map(|k| (k, binomial(3, k - 3) * if (k - 3) % 2 == 0 { 1.0 } else { -1.0 }))
        .collect();
    let terms = rl_terms(&poly, alpha.value());
    let d = |x: T| (T::lit(PI / 2.0) * x).cos() + T::lit(0.1);
    let bump = |x: T| {
        let s = x * (T::one() - x);
        T::lit(64.0) * s * s * s
    };
    Problem1D {
        x_left: T::zero(),
        x_right: T::one(),
        t_end: T::one(),
        diffusion: Arc::new(d),
        forcing: Arc::new(move |x, t| {
            let t2 = t * t;
            T::lit(3.0) * bump(x) * t2 - t2 * t * d(x) * T::lit(64.0) * eval_terms(&terms, x)
        }),
        initial: Arc::new(|_| T::zero()),
        exact: Some(Arc::new(move |x, t| bump(x) * t * t * t)),
    }
}

/// `u = x^4 (2-x)^4 y^4 (2-y)^4 t^3` on `[0, 2]^2` with
/// `d = x^2 + y^2 + 20` and `e = sin(pi (x+4)/24) + sin(pi (y+4)/24)`.
pub fn example2<T: Scalar>(alpha: FractionalOrder, beta: FractionalOrder) -> Problem2D<T> {
    // x^4 (2-x)^4 = sum_{k=4}^{8} C(4, k-4) 2^{8-k} (-1)^k x^k
    let poly: Vec<(u64, f64)> = (4..=8)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            (k, binomial(4, k - 4) * 2f64.powi(8 - k as i32) * sign)
        })
        .collect();
    let tx = rl_terms(&poly, alpha.value());
    let ty = rl_terms(&poly, beta.value());
    let q = |x: T| {
        let s = x * (T::lit(2.0) - x);
        let s2 = s * s;
        s2 * s2
    };
    let d = |x: T, y: T| x * x + y * y + T::lit(20.0);
    let e = |x: T, y: T| {
        let c = T::lit(PI / 24.0);
        (c * (x + T::lit(4.0))).sin() + (c * (y + T::lit(4.0))).sin()
    };
    Problem2D {
        x: (T::zero(), T::lit(2.0)),
        y: (T::zero(), T::lit(2.0)),
        t_end: T::one(),
        alpha,
        beta,
        d: Arc::new(d),
        e: Arc::new(e),
        forcing: Arc::new(move |x, y, t| {
            let t2 = t * t;
            let t3 = t2 * t;
            let (qx, qy) = (q(x), q(y));
            T::lit(3.0) * qx * qy * t2
                - t3 * qy * d(x, y) * eval_terms(&tx, x)
                - t3 * qx * e(x, y) * eval_terms(&ty, y)
        }),
        initial: Arc::new(|_, _| T::zero()),
        exact: Some(Arc::new(move |x, y, t| q(x) * q(y) * t * t * t)),
    }
}

/// `u = 0` on `[0, 1]` with `d = 1`.
pub fn zero_1d<T: Scalar>() -> Problem1D<T> {
    Problem1D {
        x_left: T::zero(),
        x_right: T::one(),
        t_end: T::one(),
        diffusion: Arc::new(|_| T::one()),
        forcing: Arc::new(|_, _| T::zero()),
        initial: Arc::new(|_| T::zero()),
        exact: Some(Arc::new(|_, _| T::zero())),
    }
}

/// Constant diffusion `d`, unit source, bump initial data, no exact solution.
pub fn constant_1d<T: Scalar>(d: f64) -> Problem1D<T> {
    Problem1D {
        x_left: T::zero(),
        x_right: T::one(),
        t_end: T::one(),
        diffusion: Arc::new(move |_| T::lit(d)),
        forcing: Arc::new(|_, _| T::one()),
        initial: Arc::new(|x| x * (T::one() - x)),
        exact: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_expansions() {
        let a = FractionalOrder::new(1.5).unwrap();
        let p = example1::<f64>(a);
        let ex = p.exact.as_ref().unwrap();
        assert!((ex(0.5, 1.0) - 1.0).abs() < 1e-15);
        let q = example2::<f64>(a, a);
        let ex2 = q.exact.as_ref().unwrap();
        assert!((ex2(1.0, 1.0, 1.0) - 1.0).abs() < 1e-15);
        assert!(((q.e)(0.0, 0.0) - 2.0 * (PI / 6.0).sin()).abs() < 1e-15);
    }

    #[test]
    fn rl_of_power_matches_gamma_formula() {
        // D^alpha x^2 = 2 x^{2-alpha} / Gamma(3 - alpha)
        let t = rl_terms(&[(2, 1.0)], 1.5);
        assert!((t[0].0 - 2.0 / gamma(1.5)).abs() < 1e-14);
        assert_eq!(t[0].1, 0.5);
    }

    #[test]
    fn expansion_coefficients_reproduce_polynomial() {
        let poly: Vec<(u64, f64)> = (4..=8)
            .map(|k| (k, binomial(4, k - 4) * 2f64.powi(8 - k as i32) * if k % 2 == 0 { 1.0 } else { -1.0 }))
            .collect();
        for &x in &[0.3, 1.1, 1.9] {
            let direct = (x * (2.0 - x) as f64).powi(4);
            let expanded: f64 = poly.iter().map(|&(k, a)| a * x.powi(k as i32)).sum();
            assert!((direct - expanded).abs() < 1e-12);
        }
    }
}
