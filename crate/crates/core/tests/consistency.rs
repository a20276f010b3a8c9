//! The built-in forcing terms are consistent with their exact solutions: the
//! local truncation residual `u_t - d D^alpha_h u - f` decays at second order.

use osfde::problems::{example1, example2};
use osfde::{wsgd_weights, FractionalOrder};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn order(a: f64) -> FractionalOrder {
    FractionalOrder::new(a).unwrap()
}

/// Shifted WSGD applied at `x`, with `u` extended by zero left of `left`.
fn wsgd_at(w: &[f64], alpha: f64, h: f64, left: f64, x: f64, u: impl Fn(f64) -> f64) -> f64 {
    let mut s = 0.0;
    for (k, &wk) in w.iter().enumerate() {
        let xi = x - (k as f64 - 1.0) * h;
        if xi <= left {
            break;
        }
        s += wk * u(xi);
    }
    s / h.powf(alpha)
}

fn rates(res: &[f64]) -> Vec<f64> {
    res.windows(2).map(|p| (p[0] / p[1]).log2()).collect()
}

const SAMPLES: usize = 10_000;
const EXPS: [i32; 4] = [5, 6, 7, 8];

#[test]
fn example1_forcing_is_second_order_consistent() {
    for a in [1.2, 1.5, 1.8] {
        let p = example1::<f64>(order(a));
        let ex = p.exact.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        // snap samples to the coarsest grid so every level evaluates the same points
        let pts: Vec<(f64, f64)> = (0..SAMPLES)
            .map(|_| {
                let i = rng.gen_range(1..32) as f64;
                (i / 32.0, rng.gen_range(0.05..1.0))
            })
            .collect();
        let mut res = Vec::new();
        for e in EXPS {
            let h = 2f64.powi(-e);
            let w = wsgd_weights::<f64>(order(a), (1usize << e) + 1);
            let worst = pts
                .iter()
                .map(|&(x, t)| {
                    let ut = 3.0 * ex(x, t) / t;
                    let du = wsgd_at(w.w(), a, h, 0.0, x, |s| ex(s, t));
                    (ut - (p.diffusion)(x) * du - (p.forcing)(x, t)).abs()
                })
                .fold(0.0, f64::max);
            res.push(worst);
        }
        let r = rates(&res);
        assert!(r.iter().all(|&v| v > 1.8), "alpha={a}: {res:?} rates {r:?}");
    }
}

#[test]
fn example2_forcing_is_second_order_consistent() {
    for (a, b) in [(1.5, 1.5), (1.8, 1.8), (1.1, 1.9)] {
        let p = example2::<f64>(order(a), order(b));
        let ex = p.exact.clone().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<(f64, f64, f64)> = (0..SAMPLES)
            .map(|_| {
                let i = rng.gen_range(1..32) as f64;
                let j = rng.gen_range(1..32) as f64;
                (i / 16.0, j / 16.0, rng.gen_range(0.05..1.0))
            })
            .collect();
        let mut res = Vec::new();
        for e in EXPS {
            let h = 2f64.powi(1 - e);
            let n = (1usize << e) + 1;
            let wx = wsgd_weights::<f64>(order(a), n);
            let wy = wsgd_weights::<f64>(order(b), n);
            let worst = pts
                .iter()
                .map(|&(x, y, t)| {
                    let ut = 3.0 * ex(x, y, t) / t;
                    let dx = wsgd_at(wx.w(), a, h, 0.0, x, |s| ex(s, y, t));
                    let dy = wsgd_at(wy.w(), b, h, 0.0, y, |s| ex(x, s, t));
                    (ut - (p.d)(x, y) * dx - (p.e)(x, y) * dy - (p.forcing)(x, y, t)).abs()
                })
                .fold(0.0, f64::max);
            res.push(worst);
        }
        let r = rates(&res);
        assert!(r.iter().all(|&v| v > 1.8), "({a},{b}): {res:?} rates {r:?}");
    }
}
