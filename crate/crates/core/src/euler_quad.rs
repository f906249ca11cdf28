//! Trapezoidal quadrature of Fourier-type integrals `∫ g(t) dt` accelerated by
//! the continuous Euler transform.
//!
//! The integrand is multiplied by the smooth window
//! `w(|t|) = erfc(|t|/taper_scale - taper_shift) / 2` and summed on the grid
//! `t = n h`, `n = -N-1, ..., N`. With the step and window chosen from
//! (N, ω_d, ω_u, d) the error decays like `exp(-sqrt(π d ω_d² N / (2(ω_d+ω_u))))`
//! for integrands analytic in the strip `|Im t| < d`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{FbError, Result};
pub use crate::special::erfc;

pub const DEFAULT_N: usize = 200;
pub const DEFAULT_OMEGA_D: f64 = 1.0;
pub const DEFAULT_OMEGA_U: f64 = 2.0;

/// Quadrature grid, window and the parameters they were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct EulerConfig {
    pub n_half: usize,
    pub omega_d: f64,
    pub omega_u: f64,
    /// Distance from the real axis to the nearest singularity of the integrand.
    pub d: f64,
    /// Grid step.
    pub h: f64,
    pub taper_scale: f64,
    pub taper_shift: f64,
    weights: Vec<f64>,
}

/// Smallest admissible N for the given window and singularity distance.
pub fn min_points(omega_d: f64, omega_u: f64, d: f64) -> f64 {
    2.0 * d * (omega_d + omega_u) * omega_u * omega_u / (PI * omega_d * omega_d)
}

/// Largest singularity distance `d` that `n_half` points admit.
pub fn max_distance(n_half: usize, omega_d: f64, omega_u: f64) -> f64 {
    n_half as f64 * PI * omega_d * omega_d / (2.0 * (omega_d + omega_u) * omega_u * omega_u)
}

/// Build the quadrature configuration, checking every admissibility inequality.
pub fn derive_quadrature(n_half: usize, omega_d: f64, omega_u: f64, d: f64) -> Result<EulerConfig> {
    if !(omega_d.is_finite() && omega_u.is_finite() && d.is_finite()) {
        return Err(FbError::Config(
            "omega_d, omega_u and d must be finite".into(),
        ));
    }
    if !(omega_d > 0.0) {
        return Err(FbError::Config(format!(
            "omega_d must be positive, got {omega_d}"
        )));
    }
    if !(omega_d <= 1.0) {
        return Err(FbError::Config(format!(
            "omega_d <= 1 violated (omega_d = {omega_d})"
        )));
    }
    if !(omega_u >= 1.0) {
        return Err(FbError::Config(format!(
            "omega_u >= 1 violated (omega_u = {omega_u})"
        )));
    }
    if !(omega_d / omega_u <= 0.5) {
        return Err(FbError::Config(format!(
            "omega_d / omega_u <= 1/2 violated ({omega_d} / {omega_u} = {})",
            omega_d / omega_u
        )));
    }
    if !(d > 0.0) {
        return Err(FbError::Config(format!("d must be positive, got {d}")));
    }
    let n_min = min_points(omega_d, omega_u, d);
    if n_half == 0 || (n_half as f64) < n_min {
        return Err(FbError::Config(format!(
            "N >= 2d(omega_d+omega_u)omega_u^2/(pi omega_d^2) violated (N = {n_half}, bound {n_min:.3})"
        )));
    }

    let n = n_half as f64;
    let h = (2.0 * PI * d * (omega_d + omega_u) / (omega_d * omega_d * n)).sqrt();
    let taper_scale = (n * h / omega_d).sqrt();
    let taper_shift = (omega_d * n * h / 4.0).sqrt();

    let mut cfg = EulerConfig {
        n_half,
        omega_d,
        omega_u,
        d,
        h,
        taper_scale,
        taper_shift,
        weights: Vec::new(),
    };
    cfg.weights = cfg
        .nodes()
        .map(|(_, t)| euler_weight(t.abs(), &cfg))
        .collect();
    Ok(cfg)
}

impl EulerConfig {
    /// Node indices and abscissae `(n, n h)` for `n = -N-1, ..., N`.
    pub fn nodes(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        let n = self.n_half as i64;
        (-n - 1..=n).map(move |k| (k, k as f64 * self.h))
    }

    /// Window weights aligned with [`Self::nodes`].
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        2 * self.n_half + 2
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// The continuous-Euler window `erfc(x/taper_scale - taper_shift) / 2`.
pub fn euler_weight(x: f64, cfg: &EulerConfig) -> f64 {
    0.5 * erfc(x / cfg.taper_scale - cfg.taper_shift)
}

/// Neumaier-compensated complex accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    re: f64,
    re_c: f64,
    im: f64,
    im_c: f64,
}

impl CompensatedSum {
    #[inline]
    fn add_part(sum: &mut f64, comp: &mut f64, x: f64) {
        let t = *sum + x;
        if sum.abs() >= x.abs() {
            *comp += (*sum - t) + x;
        } else {
            *comp += (x - t) + *sum;
        }
        *sum = t;
    }

    #[inline]
    pub(crate) fn add(&mut self, z: Complex64) {
        Self::add_part(&mut self.re, &mut self.re_c, z.re);
        Self::add_part(&mut self.im, &mut self.im_c, z.im);
    }

    pub(crate) fn value(&self) -> Complex64 {
        Complex64::new(self.re + self.re_c, self.im + self.im_c)
    }
}

/// `h Σ_n w(|n h|) g(n h)` over `n = -N-1, ..., N`.
///
/// Any oscillatory factor is folded into `g` by the caller. Nodes are visited
/// in increasing order and accumulated with compensation, so the result is
/// reproducible for a given configuration.
pub fn weighted_oscillatory_sum<F>(mut g: F, cfg: &EulerConfig) -> Result<Complex64>
where
    F: FnMut(f64) -> Complex64,
{
    let mut acc = CompensatedSum::default();
    for ((n, t), &w) in cfg.nodes().zip(&cfg.weights) {
        let v = g(t);
        if !(v.re.is_finite() && v.im.is_finite()) {
            return Err(FbError::NonFinite { node: n, t });
        }
        acc.add(v * w);
    }
    Ok(acc.value() * cfg.h)
}
