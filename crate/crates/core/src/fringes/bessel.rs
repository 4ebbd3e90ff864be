//! Bessel function of the first kind, order zero.
//!
//! Ascending power series below [`SERIES_LIMIT`], Hankel asymptotic expansion
//! above it. The power-series cancellation at the crossover costs about four
//! digits and the asymptotic remainder there is ~e^{-2x}, so both branches
//! stay well below 1e-11 absolute.

use std::f64::consts::PI;

const SERIES_LIMIT: f64 = 13.0;

pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_LIMIT {
        series(ax)
    } else {
        asymptotic(ax)
    }
}

fn series(x: f64) -> f64 {
    let y = -0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= y / (k * k);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-3) {
            break;
        }
        k += 1.0;
    }
    sum
}

/// J0(x) = √(2/πx)·[P(x)·cos(x − π/4) − Q(x)·sin(x − π/4)].
fn asymptotic(x: f64) -> f64 {
    let z = 8.0 * x;
    // a_k = ∏_{i=1..k} (−(2i−1)²) / (k!·(8x)^k)
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        a *= -odd * odd / (kf * z);
        // terms shrink until k ≈ 2x; stop at the smallest one
        if a.abs() >= last || a.abs() < 1e-18 {
            break;
        }
        last = a.abs();
        // P = a0 − a2 + a4 − …, Q = a1 − a3 + a5 − …
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
    }
    let (s, c) = x.sin_cos();
    let cos_shift = (c + s) * std::f64::consts::FRAC_1_SQRT_2;
    let sin_shift = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
    (2.0 / (PI * x)).sqrt() * (p * cos_shift - q * sin_shift)
}

/// k-th positive zero of J0 (k ≥ 1), McMahon start refined by Newton steps.
pub fn bessel_j0_zero(k: usize) -> f64 {
    assert!(k >= 1, "zeros are numbered from 1");
    let beta = (k as f64 - 0.25) * PI;
    let b8 = 8.0 * beta;
    let mut x = beta + 1.0 / b8 - 124.0 / (3.0 * b8.powi(3));
    for _ in 0..8 {
        // J0' = −J1
        let dx = bessel_j0(x) / -bessel_j1(x);
        x -= dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

/// J1, only used to drive the zero finder.
fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        let y = -0.25 * ax * ax;
        let mut term = 0.5 * ax;
        let mut sum = term;
        let mut k = 1.0;
        loop {
            term *= y / (k * (k + 1.0));
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-3) {
                break;
            }
            k += 1.0;
        }
        sum
    } else {
        // μ = 4; a_k = ∏ (μ − (2i−1)²) / (k!·(8x)^k)
        let z = 8.0 * ax;
        let (mut p, mut q, mut a) = (1.0, 0.0, 1.0);
        let mut last = f64::INFINITY;
        for k in 1..200 {
            let kf = k as f64;
            let odd = 2.0 * kf - 1.0;
            a *= (4.0 - odd * odd) / (kf * z);
            if a.abs() >= last || a.abs() < 1e-18 {
                break;
            }
            last = a.abs();
            match k % 4 {
                1 => q += a,
                2 => p -= a,
                3 => q -= a,
                _ => p += a,
            }
        }
        let (s, c) = ax.sin_cos();
        // x − 3π/4
        let cos_shift = (s - c) * std::f64::consts::FRAC_1_SQRT_2;
        let sin_shift = -(s + c) * std::f64::consts::FRAC_1_SQRT_2;
        (2.0 / (PI * ax)).sqrt() * (p * cos_shift - q * sin_shift)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}
