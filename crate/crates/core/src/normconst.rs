//! Normalizing constant `C(θ, γ) = ∫_{S^{p-1}} exp(Σ -θ_i x_i² + γ_i x_i) dx`,
//! its gradient, and the moments that follow from it.
//!
//! `C = π^{p/2-1} e^{-t0} ∫ A(t) e^{-i t} dt` is evaluated by the
//! Euler-windowed trapezoidal rule after moving θ to the gauge `min θ = 0` and
//! folding the signs of γ. Everything is carried on the log scale; the node
//! values are rescaled by `A(0)`, which is the peak magnitude along the contour.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{FbError, Result};
use crate::euler_quad::{
    self, derive_quadrature, weighted_oscillatory_sum, CompensatedSum, EulerConfig,
};
use crate::integrand::{
    dgamma_factor, dtheta_factor, log_integrand_unchecked, saddlepoint_contour, select_contour,
    z_at, ContourConfig,
};
use crate::params::{shift_normalize, CanonicalParams, ShiftNormalized};

/// Results whose `|Im| / |Re|` exceeds this are rejected.
pub const IMAG_RESIDUAL_LIMIT: f64 = 1e-8;

/// Lower bound on the contour distance under [`ContourRule::Saddlepoint`].
/// Below it the pole-free strip is too narrow for N = 200 to reach
/// double precision.
pub const MIN_CONTOUR_DISTANCE: f64 = 6.0;

/// How the contour shift `t0` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContourRule {
    /// Through the real saddle point of the inversion integrand, but never
    /// closer than [`MIN_CONTOUR_DISTANCE`] to `min θ`; the quadrature
    /// distance is capped at what N admits.
    Saddlepoint,
    /// Fixed distance `d` to the left of `min θ`.
    Fixed(f64),
}

/// Quadrature settings shared by every normalizing-constant evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSettings {
    pub n_points: usize,
    pub omega_d: f64,
    pub omega_u: f64,
    pub contour: ContourRule,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self {
            n_points: euler_quad::DEFAULT_N,
            omega_d: euler_quad::DEFAULT_OMEGA_D,
            omega_u: euler_quad::DEFAULT_OMEGA_U,
            contour: ContourRule::Saddlepoint,
        }
    }
}

impl QuadSettings {
    /// N = 200, ω_d = 1, ω_u = 2 with the contour at fixed distance d = 1.
    pub fn fixed_distance(d: f64) -> Self {
        Self {
            contour: ContourRule::Fixed(d),
            ..Self::default()
        }
    }

    pub fn with_points(mut self, n_points: usize) -> Self {
        self.n_points = n_points;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormConstResult {
    pub log_value: f64,
    /// `exp(log_value)` when it is a normal finite number.
    pub value: Option<f64>,
    /// `|Im S| / |Re S|` of the raw quadrature sum S.
    pub imag_residual: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormConstGrad {
    pub log_value: f64,
    pub imag_residual: f64,
    /// ∂C/∂θ_i (may over/underflow when C does; see `dlog_theta`).
    pub dtheta: Vec<f64>,
    /// ∂C/∂γ_i.
    pub dgamma: Vec<f64>,
    /// ∂ log C/∂θ_i.
    pub dlog_theta: Vec<f64>,
    /// ∂ log C/∂γ_i.
    pub dlog_gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    /// E[x_i].
    pub mean: Vec<f64>,
    /// E[x_i²].
    pub second: Vec<f64>,
}

/// Everything needed to evaluate the quadrature for one parameter point.
struct Plan {
    normalized: ShiftNormalized,
    contour: ContourConfig,
    euler: EulerConfig,
}

impl Plan {
    fn new(params: &CanonicalParams, quad: &QuadSettings) -> Result<Self> {
        let normalized = shift_normalize(params);
        let (contour, d) = match quad.contour {
            ContourRule::Fixed(d) => (select_contour(normalized.params.theta(), d)?, d),
            ContourRule::Saddlepoint => {
                let saddle = saddlepoint_contour(&normalized.params);
                let c = if saddle.d >= MIN_CONTOUR_DISTANCE {
                    saddle
                } else {
                    select_contour(normalized.params.theta(), MIN_CONTOUR_DISTANCE)?
                };
                let cap = euler_quad::max_distance(quad.n_points, quad.omega_d, quad.omega_u);
                (c, c.d.min(cap))
            }
        };
        let euler = derive_quadrature(quad.n_points, quad.omega_d, quad.omega_u, d)?;
        Ok(Self {
            normalized,
            contour,
            euler,
        })
    }

    fn theta(&self) -> &[f64] {
        self.normalized.params.theta()
    }

    fn gamma(&self) -> &[f64] {
        self.normalized.params.gamma()
    }

    /// Real log-magnitude of the integrand at t = 0, used to rescale every node.
    fn log_peak(&self) -> f64 {
        log_integrand_unchecked(0.0, self.theta(), self.gamma(), self.contour.t0).re
    }

    /// `log C` from the rescaled sum's real part.
    fn log_value(&self, sum_re: f64, log_peak: f64) -> f64 {
        let p = self.theta().len() as f64;
        (0.5 * p - 1.0) * PI.ln() - self.contour.t0 + log_peak + sum_re.ln() - self.normalized.shift
    }
}

fn residual(sum: Complex64) -> Result<f64> {
    if !(sum.re > 0.0) {
        return Err(FbError::Accuracy {
            residual: f64::INFINITY,
            limit: IMAG_RESIDUAL_LIMIT,
        });
    }
    Ok(sum.im.abs() / sum.re)
}

fn gate(residual: f64) -> Result<f64> {
    if !(residual < IMAG_RESIDUAL_LIMIT) {
        return Err(FbError::Accuracy {
            residual,
            limit: IMAG_RESIDUAL_LIMIT,
        });
    }
    Ok(residual)
}

fn representable(log_value: f64) -> Option<f64> {
    let v = log_value.exp();
    (v.is_normal()).then_some(v)
}

/// `C(θ, γ)` on the log scale, plus the value when representable.
///
/// Fails with [`FbError::Accuracy`] when the imaginary residual reaches
/// [`IMAG_RESIDUAL_LIMIT`].
pub fn norm_const(params: &CanonicalParams, quad: &QuadSettings) -> Result<NormConstResult> {
    let r = norm_const_ungated(params, quad)?;
    gate(r.imag_residual)?;
    Ok(r)
}

/// [`norm_const`] without the imaginary-residual gate, for convergence
/// studies at small node counts. Still fails if the real part is not positive.
pub fn norm_const_ungated(
    params: &CanonicalParams,
    quad: &QuadSettings,
) -> Result<NormConstResult> {
    let plan = Plan::new(params, quad)?;
    let peak = plan.log_peak();
    let (theta, gamma, t0) = (plan.theta(), plan.gamma(), plan.contour.t0);
    let sum = weighted_oscillatory_sum(
        |t| (log_integrand_unchecked(t, theta, gamma, t0) - peak + Complex64::new(0.0, -t)).exp(),
        &plan.euler,
    )?;
    let imag_residual = residual(sum)?;
    let log_value = plan.log_value(sum.re, peak);
    Ok(NormConstResult {
        log_value,
        value: representable(log_value),
        imag_residual,
    })
}

/// `C` and its partial derivatives with respect to every θ_i and γ_i.
///
/// One pass over the grid; each node's integrand is shared by all 2p partials.
pub fn norm_const_grad(params: &CanonicalParams, quad: &QuadSettings) -> Result<NormConstGrad> {
    let plan = Plan::new(params, quad)?;
    let peak = plan.log_peak();
    let (theta, gamma, t0) = (plan.theta(), plan.gamma(), plan.contour.t0);
    let p = theta.len();

    let mut base = CompensatedSum::default();
    let mut d_theta = vec![CompensatedSum::default(); p];
    let mut d_gamma = vec![CompensatedSum::default(); p];
    let mut z = vec![Complex64::new(0.0, 0.0); p];

    for ((n, t), &w) in plan.euler.nodes().zip(plan.euler.weights()) {
        let mut log_a = Complex64::new(0.0, -t) - peak;
        for ((zi, &th), &g) in z.iter_mut().zip(theta).zip(gamma) {
            *zi = z_at(th, t, t0);
            log_a += 0.25 * g * g / *zi - 0.5 * zi.ln();
        }
        let a = log_a.exp() * (w * plan.euler.h);
        if !(a.re.is_finite() && a.im.is_finite()) {
            return Err(FbError::NonFinite { node: n, t });
        }
        base.add(a);
        for i in 0..p {
            d_theta[i].add(a * dtheta_factor(gamma[i], z[i]));
            d_gamma[i].add(a * dgamma_factor(gamma[i], z[i]));
        }
    }

    let sum = base.value();
    let imag_residual = gate(residual(sum)?)?;
    let log_value = plan.log_value(sum.re, peak);
    let value = log_value.exp();

    let dlog_theta: Vec<f64> = d_theta.iter().map(|s| s.value().re / sum.re).collect();
    let dlog_gamma: Vec<f64> = d_gamma
        .iter()
        .zip(&plan.normalized.sign_flips)
        .map(|(s, flip)| flip * s.value().re / sum.re)
        .collect();
    Ok(NormConstGrad {
        log_value,
        imag_residual,
        dtheta: dlog_theta.iter().map(|g| g * value).collect(),
        dgamma: dlog_gamma.iter().map(|g| g * value).collect(),
        dlog_theta,
        dlog_gamma,
    })
}

/// First and second coordinate moments of the distribution:
/// `E[x_i] = C_{γ_i} / C` and `E[x_i²] = -C_{θ_i} / C`.
pub fn moments(params: &CanonicalParams, quad: &QuadSettings) -> Result<Moments> {
    let g = norm_const_grad(params, quad)?;
    Ok(Moments {
        mean: g.dlog_gamma,
        second: g.dlog_theta.iter().map(|v| -v).collect(),
    })
}
