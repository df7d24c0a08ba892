//! Independent numerical oracles shared by the integration tests. Nothing
//! here calls into the library's special functions or fitting code.

#![allow(dead_code)]

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use std::f64::consts::PI;

/// Composite Simpson rule with `n` (even) panels.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let n = if n % 2 == 1 { n + 1 } else { n };
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Maclaurin series of erf; accurate to ~1e-14 absolute for |z| <= 3.
pub fn erf_series(z: f64) -> f64 {
    let mut term = z;
    let mut sum = z;
    let z2 = z * z;
    for n in 1..400 {
        term *= -z2 / n as f64;
        let add = term / (2 * n + 1) as f64;
        sum += add;
        if add.abs() < 1e-18 {
            break;
        }
    }
    2.0 / PI.sqrt() * sum
}

pub fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Φ by the erf series near the center and by quadrature of the density in
/// the tails.
pub fn normal_cdf_oracle(x: f64) -> f64 {
    if x.abs() <= 3.0 {
        0.5 * (1.0 + erf_series(x / 2f64.sqrt()))
    } else if x < 0.0 {
        simpson(normal_pdf, x - 15.0, x, 60_000)
    } else {
        1.0 - simpson(normal_pdf, -x - 15.0, -x, 60_000)
    }
}

/// Root of the increasing function `f(x) = target` on `[lo, hi]` by bisection.
pub fn bisect(f: impl Fn(f64) -> f64, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Γ((ν+1)/2) / Γ(ν/2) by the half-integer recursion.
fn gamma_ratio(nu: u32) -> f64 {
    let (mut r, mut k) = if nu % 2 == 1 {
        (1.0 / PI.sqrt(), 1)
    } else {
        (PI.sqrt() / 2.0, 2)
    };
    while k < nu {
        r *= (k as f64 + 1.0) / k as f64;
        k += 2;
    }
    r
}

pub fn t_pdf(t: f64, nu: u32) -> f64 {
    let v = nu as f64;
    gamma_ratio(nu) / (v * PI).sqrt() * (1.0 + t * t / v).powf(-(v + 1.0) / 2.0)
}

/// F_ν(t) by Simpson quadrature of the density from 0.
pub fn t_cdf_quadrature(t: f64, nu: u32) -> f64 {
    let half = simpson(|x| t_pdf(x, nu), 0.0, t.abs(), 20_000);
    if t >= 0.0 {
        0.5 + half
    } else {
        0.5 - half
    }
}

pub fn normal_draws(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
}

/// Poisson log-likelihood (without the `ln y!` constant) of counts under a
/// polynomial log-mean in `(m - center) / scale`.
pub fn poisson_loglik(mids: &[f64], counts: &[f64], center: f64, scale: f64, coef: &[f64]) -> f64 {
    mids.iter()
        .zip(counts)
        .map(|(&m, &y)| {
            let x = (m - center) / scale;
            let eta: f64 = coef.iter().rev().fold(0.0, |acc, &c| acc * x + c);
            y * eta - eta.exp()
        })
        .sum()
}

/// Derivative-free maximizer: cyclic coordinate search where each
/// coordinate is refined on a shrinking grid (golden-section bracketing)
/// until a full sweep moves no coefficient by more than `1e-12`.
pub fn grid_refine_maximizer(
    mids: &[f64],
    counts: &[f64],
    center: f64,
    scale: f64,
    start: &[f64],
) -> Vec<f64> {
    let ll = |c: &[f64]| poisson_loglik(mids, counts, center, scale, c);
    let mut coef = start.to_vec();
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    for _sweep in 0..20_000 {
        let mut max_move: f64 = 0.0;
        for j in 0..coef.len() {
            let f = |v: f64| {
                let mut c = coef.clone();
                c[j] = v;
                ll(&c)
            };
            // bracket
            let mut width = 1.0;
            let c0 = coef[j];
            while f(c0 + width) > f(c0) || f(c0 - width) > f(c0) {
                width *= 2.0;
                if width > 1e6 {
                    break;
                }
            }
            let (mut a, mut b) = (c0 - width, c0 + width);
            let mut x1 = b - gr * (b - a);
            let mut x2 = a + gr * (b - a);
            let (mut f1, mut f2) = (f(x1), f(x2));
            while b - a > 1e-13 {
                if f1 < f2 {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + gr * (b - a);
                    f2 = f(x2);
                } else {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - gr * (b - a);
                    f1 = f(x1);
                }
            }
            let best = 0.5 * (a + b);
            max_move = max_move.max((best - c0).abs());
            coef[j] = best;
        }
        if max_move < 1e-12 {
            break;
        }
    }
    coef
}

/// Count-weighted mean and SD of bin midpoints.
pub fn weighted_center_scale(mids: &[f64], counts: &[f64]) -> (f64, f64) {
    let total: f64 = counts.iter().sum();
    let center = mids.iter().zip(counts).map(|(m, c)| m * c).sum::<f64>() / total;
    let var = mids
        .iter()
        .zip(counts)
        .map(|(m, c)| c * (m - center).powi(2))
        .sum::<f64>()
        / total;
    (center, var.sqrt())
}

/// Bin counts proportional to exact N(0,1) bin probabilities on
/// `[lo, lo + k*width)`, scaled to roughly `total`.
pub fn exact_normal_counts(lo: f64, width: f64, k: usize, total: f64) -> Vec<u64> {
    (0..k)
        .map(|i| {
            let a = lo + i as f64 * width;
            let p = normal_cdf_oracle(a + width) - normal_cdf_oracle(a);
            (total * p).round() as u64
        })
        .collect()
}
