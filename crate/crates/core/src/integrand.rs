//! The Fourier-representation integrand
//!
//! ```text
//! A(t; θ, γ) = Π_i exp(γ_i² / (4 z_i)) / sqrt(z_i),   z_i = θ_i - i t - t0,
//! ```
//!
//! its first partial derivatives, and the choice of the contour shift `t0`.
//! Because `t0 < min θ` every `z_i` has positive real part, so the principal
//! square root is continuous along the whole real line.

use num_complex::Complex64;

use crate::error::{FbError, Result};
use crate::params::CanonicalParams;

/// Contour shift and its distance to the nearest branch point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContourConfig {
    pub t0: f64,
    /// `min θ - t0`.
    pub d: f64,
}

/// Place the contour at distance `target_d` to the left of the smallest θ.
pub fn select_contour(theta: &[f64], target_d: f64) -> Result<ContourConfig> {
    if !(target_d > 0.0 && target_d.is_finite()) {
        return Err(FbError::Config(format!(
            "contour distance must be positive, got {target_d}"
        )));
    }
    let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ContourConfig {
        t0: min - target_d,
        d: target_d,
    })
}

/// Place the contour through the real saddle point of the Laplace-inversion
/// integrand, i.e. the `d > 0` solving
///
/// ```text
/// Σ_i [ γ_i² / (4 u_i²) + 1 / (2 u_i) ] = 1,   u_i = θ_i - min θ + d.
/// ```
///
/// On this contour the integrand does not oscillate near `t = 0` and its
/// magnitude peaks there, which removes the cancellation that a fixed small
/// distance suffers for large ‖γ‖ or large p.
pub fn saddlepoint_contour(params: &CanonicalParams) -> ContourConfig {
    let min = params.min_theta();
    let shifted: Vec<f64> = params.theta().iter().map(|t| t - min).collect();
    let g2: Vec<f64> = params.gamma().iter().map(|g| 0.25 * g * g).collect();

    // phi(d) - 1 is convex and decreasing; Newton from the left of the root
    // increases monotonically towards it.
    let phi = |d: f64| -> (f64, f64) {
        let mut f = -1.0;
        let mut df = 0.0;
        for (&s, &q) in shifted.iter().zip(&g2) {
            let u = s + d;
            let inv = 1.0 / u;
            f += q * inv * inv + 0.5 * inv;
            df -= 2.0 * q * inv * inv * inv + 0.5 * inv * inv;
        }
        (f, df)
    };
    // Root lies in [1/2, p/4 + sqrt(p²/16 + Σγ²/4)].
    let mut d = 0.5;
    for _ in 0..200 {
        let (f, df) = phi(d);
        if f <= 0.0 {
            break;
        }
        let next = d - f / df;
        if !(next > d) || (next - d) <= 1e-15 * d {
            d = next.max(d);
            break;
        }
        d = next;
    }
    ContourConfig { t0: min - d, d }
}

fn check(params: &CanonicalParams, contour: &ContourConfig) -> Result<()> {
    let min = params.min_theta();
    if !(contour.t0 < min) {
        return Err(FbError::Domain(format!(
            "contour shift t0 = {} must lie strictly below min theta = {min}",
            contour.t0
        )));
    }
    Ok(())
}

#[inline]
pub(crate) fn z_at(theta_i: f64, t: f64, t0: f64) -> Complex64 {
    Complex64::new(theta_i - t0, -t)
}

/// `log A(t)` as `Σ_i γ_i²/(4 z_i) - ln(z_i)/2`, without validation.
#[inline]
pub(crate) fn log_integrand_unchecked(t: f64, theta: &[f64], gamma: &[f64], t0: f64) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (&th, &g) in theta.iter().zip(gamma) {
        let z = z_at(th, t, t0);
        acc += 0.25 * g * g / z - 0.5 * z.ln();
    }
    acc
}

/// `A(t; θ, γ)`.
pub fn integrand_value(
    t: f64,
    params: &CanonicalParams,
    contour: &ContourConfig,
) -> Result<Complex64> {
    check(params, contour)?;
    Ok(log_integrand_unchecked(t, params.theta(), params.gamma(), contour.t0).exp())
}

/// `∂A/∂θ_i = A(t) · (-γ_i²/(4 z_i²) - 1/(2 z_i))`.
pub fn integrand_dtheta(
    t: f64,
    i: usize,
    params: &CanonicalParams,
    contour: &ContourConfig,
) -> Result<Complex64> {
    check_index(i, params)?;
    let a = integrand_value(t, params, contour)?;
    let z = z_at(params.theta()[i], t, contour.t0);
    Ok(a * dtheta_factor(params.gamma()[i], z))
}

/// `∂A/∂γ_i = A(t) · γ_i / (2 z_i)`.
pub fn integrand_dgamma(
    t: f64,
    i: usize,
    params: &CanonicalParams,
    contour: &ContourConfig,
) -> Result<Complex64> {
    check_index(i, params)?;
    let a = integrand_value(t, params, contour)?;
    let z = z_at(params.theta()[i], t, contour.t0);
    Ok(a * dgamma_factor(params.gamma()[i], z))
}

#[inline]
pub(crate) fn dtheta_factor(gamma_i: f64, z: Complex64) -> Complex64 {
    let inv = z.inv();
    -0.25 * gamma_i * gamma_i * inv * inv - 0.5 * inv
}

#[inline]
pub(crate) fn dgamma_factor(gamma_i: f64, z: Complex64) -> Complex64 {
    0.5 * gamma_i * z.inv()
}

fn check_index(i: usize, params: &CanonicalParams) -> Result<()> {
    if i >= params.dim() {
        return Err(FbError::Domain(format!(
            "index {i} out of range for dimension {}",
            params.dim()
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_params(rng: &mut ChaCha8Rng, p: usize) -> CanonicalParams {
        let theta = (0..p).map(|_| rng.random::<f64>() * 5.0).collect();
        let gamma = (0..p).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        CanonicalParams::new(theta, gamma).unwrap()
    }

    #[test]
    fn contour_examples() {
        let c = select_contour(&[0.0, 1.0, 2.0, 5.0], 1.0).unwrap();
        assert_eq!(c, ContourConfig { t0: -1.0, d: 1.0 });
        let c = select_contour(&[3.0, 4.0], 1.0).unwrap();
        assert_eq!(c, ContourConfig { t0: 2.0, d: 1.0 });
        assert!(select_contour(&[0.0], 0.0).is_err());
    }

    #[test]
    fn saddle_contour_known_cases() {
        // Uniform on S^{p-1}: p/(2d) = 1.
        for p in [2usize, 3, 10] {
            let c = saddlepoint_contour(&CanonicalParams::uniform(p));
            assert!((c.d - p as f64 / 2.0).abs() < 1e-12, "{p}: {c:?}");
        }
        // vMF on S²: 3/(2d) + κ²/(4d²) = 1.
        let kappa: f64 = 20.0;
        let c = saddlepoint_contour(
            &CanonicalParams::new(vec![0.0; 3], vec![0.0, 0.0, kappa]).unwrap(),
        );
        let want = 0.75 + (0.75f64 * 0.75 + kappa * kappa / 4.0).sqrt();
        assert!((c.d - want).abs() < 1e-10);
    }

    #[test]
    fn saddle_contour_respects_shift() {
        let p = CanonicalParams::new(vec![3.0, 5.0, 9.0], vec![1.0, 0.0, 2.0]).unwrap();
        let c = saddlepoint_contour(&p);
        assert!(c.t0 < 3.0);
        assert!((3.0 - c.t0 - c.d).abs() < 1e-14);
        assert!(c.d >= 0.5);
    }

    #[test]
    fn scalar_values() {
        let p = CanonicalParams::new(vec![1.0], vec![0.0]).unwrap();
        let c = ContourConfig { t0: 0.0, d: 1.0 };
        assert!((integrand_value(0.0, &p, &c).unwrap() - 1.0).norm() < 1e-15);
        assert!((integrand_dtheta(0.0, 0, &p, &c).unwrap() + 0.5).norm() < 1e-15);
        assert_eq!(
            integrand_dgamma(0.3, 0, &p, &c).unwrap(),
            Complex64::new(0.0, 0.0)
        );
    }

    #[test]
    fn invalid_contour_is_rejected() {
        let p = CanonicalParams::new(vec![1.0, 2.0], vec![0.0, 0.0]).unwrap();
        let c = ContourConfig { t0: 1.0, d: 0.0 };
        assert!(matches!(
            integrand_value(0.0, &p, &c),
            Err(FbError::Domain(_))
        ));
        let ok = ContourConfig { t0: 0.0, d: 1.0 };
        assert!(integrand_dtheta(0.0, 2, &p, &ok).is_err());
    }

    #[test]
    fn conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let p = random_params(&mut rng, 4);
            let c = select_contour(p.theta(), 1.0).unwrap();
            let t = rng.random::<f64>() * 40.0 - 20.0;
            let a = integrand_value(t, &p, &c).unwrap();
            let b = integrand_value(-t, &p, &c).unwrap();
            assert!((a - b.conj()).norm() <= 1e-14 * a.norm());
            let ga = integrand_dgamma(t, 1, &p, &c).unwrap();
            let gb = integrand_dgamma(-t, 1, &p, &c).unwrap();
            assert!((ga - gb.conj()).norm() <= 1e-14 * (ga.norm() + 1e-300));
        }
    }

    #[test]
    fn gamma_sign_invariance_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..20 {
            let p = random_params(&mut rng, 5);
            let flipped: Vec<f64> = p.gamma().iter().map(|g| -g).collect();
            let q = CanonicalParams::new(p.theta().to_vec(), flipped).unwrap();
            let c = select_contour(p.theta(), 1.0).unwrap();
            let t = rng.random::<f64>() * 10.0;
            assert_eq!(
                integrand_value(t, &p, &c).unwrap(),
                integrand_value(t, &q, &c).unwrap()
            );
        }
    }

    #[test]
    fn branch_stays_in_right_half_plane() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        let p = random_params(&mut rng, 6);
        let c = saddlepoint_contour(&p);
        for k in -500..=500 {
            let t = k as f64 * 0.37;
            for &th in p.theta() {
                assert!(z_at(th, t, c.t0).re >= c.d - 1e-12);
            }
        }
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let step = 1e-6;
        for _ in 0..100 {
            let dim = 1 + (rng.random::<f64>() * 5.0) as usize;
            let p = random_params(&mut rng, dim);
            let c = select_contour(p.theta(), 0.5 + rng.random::<f64>()).unwrap();
            let t = rng.random::<f64>() * 8.0 - 4.0;
            let i = (rng.random::<f64>() * dim as f64) as usize;

            let bump = |dt: f64, dg: f64| {
                let mut th = p.theta().to_vec();
                let mut ga = p.gamma().to_vec();
                th[i] += dt;
                ga[i] += dg;
                integrand_value(t, &CanonicalParams::new(th, ga).unwrap(), &c).unwrap()
            };
            let fd_theta = (bump(step, 0.0) - bump(-step, 0.0)) / (2.0 * step);
            let fd_gamma = (bump(0.0, step) - bump(0.0, -step)) / (2.0 * step);
            let an_theta = integrand_dtheta(t, i, &p, &c).unwrap();
            let an_gamma = integrand_dgamma(t, i, &p, &c).unwrap();
            let scale = integrand_value(t, &p, &c).unwrap().norm();
            assert!(
                (fd_theta - an_theta).norm() <= 1e-7 * an_theta.norm().max(scale),
                "theta: {fd_theta} vs {an_theta}"
            );
            assert!(
                (fd_gamma - an_gamma).norm() <= 1e-7 * an_gamma.norm().max(scale),
                "gamma: {fd_gamma} vs {an_gamma}"
            );
        }
    }
}
