//! Normalizing constants of Fisher–Bingham distributions on the unit sphere,
//! computed by an Euler-windowed trapezoidal rule applied to a Fourier-type
//! integral representation, together with gradients, maximum-likelihood
//! fitting and rejection sampling built on top of them.
//!
//! ```
//! use fbnorm::{norm_const, CanonicalParams, QuadSettings};
//!
//! let params = CanonicalParams::bingham(vec![0.0, 1.0, 2.0, 5.0]).unwrap();
//! let c = norm_const(&params, &QuadSettings::default()).unwrap();
//! assert!((c.value.unwrap() - 4.238950).abs() < 1e-6);
//! ```

// NaN-rejecting guards are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod euler_quad;
pub mod integrand;
pub mod mle;
pub mod normconst;
pub mod oracles;
pub mod params;
pub mod sampler;
pub mod special;

pub use error::{FbError, Result};
pub use euler_quad::{derive_quadrature, euler_weight, weighted_oscillatory_sum, EulerConfig};
pub use integrand::{
    integrand_dgamma, integrand_dtheta, integrand_value, saddlepoint_contour, select_contour,
    ContourConfig,
};
pub use mle::{
    fit, frame_update, grad_neg_avg_log_lik, neg_avg_log_lik, sufficient_stats, FitConfig, FitInit,
    FitResult, ObjectiveGrad, Optimizer, SufficientStats,
};
pub use normconst::{
    moments, norm_const, norm_const_grad, norm_const_ungated, ContourRule, Moments, NormConstGrad,
    NormConstResult, QuadSettings,
};
pub use oracles::{
    complex_bingham_exact, complex_to_real_theta, mc_sphere_estimate, reference_quadrature,
    McEstimate,
};
pub use params::{
    from_mean_covariance, shift_normalize, CanonicalParams, FrameDecomposition, FullParams,
    ShiftNormalized,
};
pub use sampler::{sample_fb, sample_fb_with, sample_uniform_sphere, Envelope, SampleBatch};
