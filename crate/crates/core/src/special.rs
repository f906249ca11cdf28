//! Special functions needed by the quadrature and the sphere-area constants.

use std::f64::consts::PI;

const FRAC_2_SQRT_PI: f64 = std::f64::consts::FRAC_2_SQRT_PI;

/// Below this argument `erfc` is computed as `1 - erf` from a positive series;
/// above it a continued fraction is used.
const SERIES_CUTOFF: f64 = 2.0;

/// `erfc(x)` underflows to zero beyond this point.
const UNDERFLOW: f64 = 27.3;

/// Complementary error function.
///
/// Relative accuracy is better than 1e-13 on `|x| <= 10`. Negative arguments use
/// the reflection `erfc(-x) = 2 - erfc(x)`.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x < 0.0 {
        return 2.0 - erfc(-x);
    }
    if x < SERIES_CUTOFF {
        return 1.0 - erf_series(x);
    }
    if x > UNDERFLOW {
        return 0.0;
    }
    erfc_continued_fraction(x)
}

/// Error function, `1 - erfc(x)` with the series used directly on small arguments.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.abs() < SERIES_CUTOFF {
        return x.signum() * erf_series(x.abs());
    }
    1.0 - erfc(x)
}

/// erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n (2x^2)^n x / (1*3*...*(2n+1)).
///
/// Every term is positive, so there is no cancellation for `0 <= x < 2`.
fn erf_series(x: f64) -> f64 {
    let two_x2 = 2.0 * x * x;
    let mut term = x;
    let mut sum = x;
    let mut k = 0u32;
    loop {
        k += 1;
        term *= two_x2 / f64::from(2 * k + 1);
        sum += term;
        if term <= sum * 1e-17 || k > 200 {
            break;
        }
    }
    FRAC_2_SQRT_PI * (-x * x).exp() * sum
}

/// erfc(x) = exp(-x^2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))
/// evaluated with the modified Lentz algorithm.
fn erfc_continued_fraction(x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let mut f = x;
    let mut c = x;
    let mut d = 0.0;
    for k in 1..5000 {
        let a = f64::from(k) * 0.5;
        d = x + a * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = x + a / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x * x).exp() / (PI.sqrt() * f)
}

/// `ln Γ(k/2)` for a positive integer `k`, by the exact recurrence from Γ(1/2) and Γ(1).
pub fn ln_gamma_half_integer(k: usize) -> f64 {
    assert!(k >= 1, "ln_gamma_half_integer requires k >= 1");
    let (mut x, mut acc) = if k.is_multiple_of(2) {
        (1.0, 0.0)
    } else {
        (0.5, 0.5 * PI.ln())
    };
    let target = k as f64 / 2.0;
    while x < target {
        acc += x.ln();
        x += 1.0;
    }
    acc
}

/// Logarithm of the surface area of the unit sphere S^{p-1} in R^p, `2 π^{p/2} / Γ(p/2)`.
pub fn ln_sphere_area(p: usize) -> f64 {
    std::f64::consts::LN_2 + 0.5 * p as f64 * PI.ln() - ln_gamma_half_integer(p)
}
