use nalgebra::DMatrix;

use super::stats::SufficientStats;
use crate::error::{FbError, Result};
use crate::normconst::{norm_const, norm_const_grad, QuadSettings};
use crate::params::CanonicalParams;

/// Objective value with its gradient in θ and γ.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveGrad {
    pub value: f64,
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
}

pub(crate) fn check_frame(o: &DMatrix<f64>, p: usize) -> Result<()> {
    if o.nrows() != p || o.ncols() != p {
        return Err(FbError::Domain(format!(
            "frame is {}x{}, expected {p}x{p}",
            o.nrows(),
            o.ncols()
        )));
    }
    let drift = (o * o.transpose() - DMatrix::identity(p, p)).amax();
    if !(drift < 1e-8) {
        return Err(FbError::Domain(format!(
            "frame is not orthogonal (drift {drift:e})"
        )));
    }
    Ok(())
}

fn checked_params(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
) -> Result<CanonicalParams> {
    let p = stats.dim();
    if theta.len() != p {
        return Err(FbError::Domain(format!(
            "theta has length {}, data has p = {p}",
            theta.len()
        )));
    }
    check_frame(o, p)?;
    CanonicalParams::new(theta.to_vec(), gamma.to_vec())
}

/// The part of the objective that depends on the frame: `Σ θ_i (O A Oᵀ)_ii - γ · (O B)`.
pub(crate) fn data_term(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
) -> f64 {
    let (s, b) = stats.rotated(o);
    theta
        .iter()
        .enumerate()
        .map(|(i, t)| t * s[(i, i)])
        .sum::<f64>()
        - gamma.iter().zip(b.iter()).map(|(g, b)| g * b).sum::<f64>()
}

/// Negative average log-likelihood `log C(θ, γ) + Σ θ_i (O A Oᵀ)_ii - γ · (O B)`.
pub fn neg_avg_log_lik(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
    quad: &QuadSettings,
) -> Result<f64> {
    let params = checked_params(theta, gamma, o, stats)?;
    let log_c = norm_const(&params, quad)?.log_value;
    Ok(log_c + data_term(theta, gamma, o, stats))
}

/// [`neg_avg_log_lik`] and its gradient:
/// `∂/∂θ_i = ∂ log C/∂θ_i + (O A Oᵀ)_ii`, `∂/∂γ_i = ∂ log C/∂γ_i - (O B)_i`.
pub fn grad_neg_avg_log_lik(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
    quad: &QuadSettings,
) -> Result<ObjectiveGrad> {
    let params = checked_params(theta, gamma, o, stats)?;
    let g = norm_const_grad(&params, quad)?;
    let (s, b) = stats.rotated(o);
    Ok(ObjectiveGrad {
        value: g.log_value + data_term(theta, gamma, o, stats),
        theta: g
            .dlog_theta
            .iter()
            .enumerate()
            .map(|(i, d)| d + s[(i, i)])
            .collect(),
        gamma: g
            .dlog_gamma
            .iter()
            .zip(b.iter())
            .map(|(d, b)| d - b)
            .collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mle::stats::sufficient_stats;
    use crate::sampler::sample_fb;
    use nalgebra::DVector;

    fn stats_from(a: DMatrix<f64>, b: Vec<f64>) -> SufficientStats {
        SufficientStats {
            a,
            b: DVector::from_vec(b),
            n: 1,
        }
    }

    #[test]
    fn uniform_gives_log_area() {
        let stats = sufficient_stats(&[0.6, 0.0, 0.8, 0.0, 1.0, 0.0], 3).unwrap();
        let f = neg_avg_log_lik(
            &[0.0; 3],
            &[0.0; 3],
            &DMatrix::identity(3, 3),
            &stats,
            &QuadSettings::default(),
        )
        .unwrap();
        assert!((f - 2.531_024_246_969_291).abs() < 1e-9, "{f}");
    }

    #[test]
    fn two_dim_direct_evaluation() {
        let quad = QuadSettings::default();
        let stats = stats_from(DMatrix::identity(2, 2) * 0.5, vec![0.0, 0.0]);
        let f = neg_avg_log_lik(
            &[0.0, 1.0],
            &[0.0, 0.0],
            &DMatrix::identity(2, 2),
            &stats,
            &quad,
        )
        .unwrap();
        let c = norm_const(&CanonicalParams::bingham(vec![0.0, 1.0]).unwrap(), &quad).unwrap();
        assert!((f - (c.log_value + 0.5)).abs() < 1e-12);
    }

    #[test]
    fn gauge_direction_is_flat() {
        let params = CanonicalParams::new(vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]).unwrap();
        let batch = sample_fb(&params, 500, 3, 1 << 30).unwrap();
        let stats = sufficient_stats(batch.as_slice(), 3).unwrap();
        let o = DMatrix::identity(3, 3);
        let quad = QuadSettings::default();
        let base = neg_avg_log_lik(&[1.0, 2.0, 3.0], &[0.3, -1.0, 2.0], &o, &stats, &quad).unwrap();
        for c in [-3.7, -0.2, 0.9, 12.5] {
            let theta = [1.0 + c, 2.0 + c, 3.0 + c];
            let f = neg_avg_log_lik(&theta, &[0.3, -1.0, 2.0], &o, &stats, &quad).unwrap();
            assert!((f - base).abs() < 1e-9, "c = {c}: {f} vs {base}");
        }
    }

    #[test]
    fn uniform_data_is_stationary_at_zero() {
        let stats = stats_from(DMatrix::identity(4, 4) / 4.0, vec![0.0; 4]);
        let g = grad_neg_avg_log_lik(
            &[0.0; 4],
            &[0.0; 4],
            &DMatrix::identity(4, 4),
            &stats,
            &QuadSettings::default(),
        )
        .unwrap();
        assert!(
            g.theta.iter().chain(&g.gamma).all(|v| v.abs() < 1e-10),
            "{g:?}"
        );
    }

    #[test]
    fn gradient_matches_finite_differences_and_sums_to_zero() {
        let params = CanonicalParams::new(vec![0.5, 1.0, 2.0], vec![-1.0, 0.5, 1.5]).unwrap();
        let batch = sample_fb(&params, 300, 8, 1 << 30).unwrap();
        let stats = sufficient_stats(batch.as_slice(), 3).unwrap();
        let quad = QuadSettings::default();
        let angle: f64 = 0.4;
        let o = DMatrix::from_row_slice(
            3,
            3,
            &[
                angle.cos(),
                -angle.sin(),
                0.0,
                angle.sin(),
                angle.cos(),
                0.0,
                0.0,
                0.0,
                1.0,
            ],
        );
        let theta = [0.2, 1.3, 2.1];
        let gamma = [-0.7, 0.4, 1.2];
        let g = grad_neg_avg_log_lik(&theta, &gamma, &o, &stats, &quad).unwrap();
        let total: f64 = g.theta.iter().sum();
        assert!(total.abs() < 1e-8, "{total:e}");
        let h = 1e-5;
        for i in 0..3 {
            let mut tp = theta;
            let mut tm = theta;
            tp[i] += h;
            tm[i] -= h;
            let fd = (neg_avg_log_lik(&tp, &gamma, &o, &stats, &quad).unwrap()
                - neg_avg_log_lik(&tm, &gamma, &o, &stats, &quad).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g.theta[i]).abs() < 1e-6,
                "theta {i}: {fd} vs {}",
                g.theta[i]
            );
            let mut gp = gamma;
            let mut gm = gamma;
            gp[i] += h;
            gm[i] -= h;
            let fd = (neg_avg_log_lik(&theta, &gp, &o, &stats, &quad).unwrap()
                - neg_avg_log_lik(&theta, &gm, &o, &stats, &quad).unwrap())
                / (2.0 * h);
            assert!(
                (fd - g.gamma[i]).abs() < 1e-6,
                "gamma {i}: {fd} vs {}",
                g.gamma[i]
            );
        }
    }

    #[test]
    fn rejects_non_orthogonal_frame() {
        let stats = stats_from(DMatrix::identity(2, 2) * 0.5, vec![0.0, 0.0]);
        let o = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(neg_avg_log_lik(
            &[0.0, 1.0],
            &[0.0, 0.0],
            &o,
            &stats,
            &QuadSettings::default()
        )
        .is_err());
    }
}
