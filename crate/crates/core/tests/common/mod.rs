#![allow(dead_code)]

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sinh_poisson::model::{functional_j, gradient_j, hessian_apply};
use sinh_poisson::{Field, Grid, Parameters};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Mean-zero white noise with entries in `[-amp, amp]`.
pub fn noise(grid: &Grid, seed: u64, amp: f64) -> Field {
    let mut r = rng(seed);
    let values = (0..grid.len()).map(|_| r.gen_range(-amp..amp)).collect();
    Field::new(grid.clone(), values).unwrap().projected()
}

/// Random trigonometric polynomial with wavenumbers up to `kmax`, scaled so
/// that its sup norm is `amp`.
pub fn smooth(grid: &Grid, seed: u64, kmax: i32, amp: f64) -> Field {
    let mut r = rng(seed);
    let (lx, ly) = (grid.lx(), grid.ly());
    let mut terms = Vec::new();
    for k1 in -kmax..=kmax {
        for k2 in 0..=kmax {
            if k1 == 0 && k2 == 0 {
                continue;
            }
            terms.push((
                k1 as f64,
                k2 as f64,
                r.gen_range(-1.0..1.0),
                r.gen_range(0.0..6.3),
            ));
        }
    }
    let tau = 2.0 * std::f64::consts::PI;
    let f = Field::from_fn(grid, |x, y| {
        terms
            .iter()
            .map(|(a, b, c, ph)| c * (tau * (a * x / lx + b * y / ly) + ph).cos())
            .sum()
    })
    .projected();
    let m = f.max_abs();
    f.scaled(amp / m)
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

const EIGHT_PI: f64 = 8.0 * PI;

/// Roots in `x` of `(x − y)² = 8π(x + y/γ)`, solved as a plain quadratic.
pub fn roots_in_x(y: f64, gamma: f64) -> [f64; 2] {
    let b = -(2.0 * y + EIGHT_PI);
    let c = y * y - EIGHT_PI * y / gamma;
    let disc = (b * b - 4.0 * c).sqrt();
    [(-b - disc) / 2.0, (-b + disc) / 2.0]
}

/// Minimum of `x + γy` over parabola points with `x ≥ 8π`, `y ≥ 8π/γ`, by a
/// dense scan in `y` refined around the best sample.
pub fn alpha_by_scan(gamma: f64) -> f64 {
    let objective = |y: f64| -> f64 {
        roots_in_x(y, gamma)
            .into_iter()
            .filter(|&x| x >= EIGHT_PI)
            .map(|x| x + gamma * y)
            .fold(f64::INFINITY, f64::min)
    };
    let (mut lo, mut hi) = (EIGHT_PI / gamma, EIGHT_PI / gamma + 4000.0);
    let samples = 20_000;
    let mut best = f64::INFINITY;
    for _ in 0..8 {
        let dy = (hi - lo) / samples as f64;
        let mut arg = lo;
        for i in 0..=samples {
            let y = lo + dy * i as f64;
            let val = objective(y);
            if val < best {
                best = val;
                arg = y;
            }
        }
        lo = (arg - dy).max(EIGHT_PI / gamma);
        hi = arg + dy;
    }
    best
}

/// Truncation error stays well above rounding for O(1) fields at these steps.
pub const STEPS: [f64; 3] = [8e-2, 4e-2, 2e-2];

/// Observed orders between consecutive step sizes.
pub fn orders(errors: &[f64]) -> Vec<f64> {
    errors
        .windows(2)
        .zip(STEPS.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect()
}

pub fn fd_gradient_errors(v: &Field, phi: &Field, p: &Parameters) -> Vec<f64> {
    let g = v.grid();
    let exact = g.inner(&gradient_j(v, p).unwrap(), phi);
    STEPS
        .iter()
        .map(|&h| {
            let plus = functional_j(&v.lin_comb(1.0, phi, h), p).unwrap();
            let minus = functional_j(&v.lin_comb(1.0, phi, -h), p).unwrap();
            ((plus - minus) / (2.0 * h) - exact).abs()
        })
        .collect()
}

pub fn fd_hessian_errors(v: &Field, phi: &Field, p: &Parameters) -> Vec<f64> {
    let g = v.grid();
    let exact = hessian_apply(v, phi, p).unwrap();
    STEPS
        .iter()
        .map(|&h| {
            let plus = gradient_j(&v.lin_comb(1.0, phi, h), p).unwrap();
            let minus = gradient_j(&v.lin_comb(1.0, phi, -h), p).unwrap();
            let fd = plus.lin_comb(0.5 / h, &minus, -0.5 / h);
            g.l2_norm(&fd.lin_comb(1.0, &exact, -1.0))
        })
        .collect()
}

/// Smallest error still far above rounding noise.
pub fn usable(errors: &[f64]) -> bool {
    errors[errors.len() - 1] > 1e-8
}
