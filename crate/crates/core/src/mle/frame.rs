use nalgebra::DMatrix;

use super::objective::{check_frame, data_term};
use super::stats::SufficientStats;
use crate::error::{FbError, Result};

const DEFAULT_SHRINK: f64 = 0.5;
const DEFAULT_ARMIJO: f64 = 1e-4;
const MAX_HALVINGS: usize = 60;

/// Skew-symmetric `v = M - Mᵀ` with `M = ΘS - SΘ - γ bᵀ`, `S = O A Oᵀ`, `b = O B`.
///
/// Along `O(t) = exp(tV) O` the objective changes at rate `½⟨v, V⟩`, so
/// `-v` is the steepest-descent direction on the orthogonal group.
pub fn skew_gradient(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
) -> DMatrix<f64> {
    let p = theta.len();
    let (s, b) = stats.rotated(o);
    let m = DMatrix::from_fn(p, p, |i, j| {
        theta[i] * s[(i, j)] - s[(i, j)] * theta[j] - gamma[i] * b[j]
    });
    &m - m.transpose()
}

/// Nearest orthogonal matrix (polar factor) when `q` has drifted.
fn reorthogonalize(q: DMatrix<f64>) -> DMatrix<f64> {
    let p = q.nrows();
    if (&q * q.transpose() - DMatrix::identity(p, p)).amax() <= 1e-10 {
        return q;
    }
    let svd = q.svd(true, true);
    let (u, vt) = (svd.u.expect("u requested"), svd.v_t.expect("v_t requested"));
    u * vt
}

/// `exp(-t v) O`, orthogonal to 1e-10.
pub(crate) fn rotate(v: &DMatrix<f64>, t: f64, o: &DMatrix<f64>) -> DMatrix<f64> {
    reorthogonalize((v * -t).exp() * o)
}

pub(crate) struct FrameStep {
    pub o: DMatrix<f64>,
    pub vhat_norm: f64,
    pub decrease: f64,
    pub step: f64,
}

pub(crate) fn frame_step(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
    shrink: f64,
    armijo: f64,
    initial_step: f64,
) -> FrameStep {
    let v = skew_gradient(theta, gamma, o, stats);
    let vhat_norm = v.norm();
    let unchanged = FrameStep {
        o: o.clone(),
        vhat_norm,
        decrease: 0.0,
        step: 0.0,
    };
    if vhat_norm == 0.0 {
        return unchanged;
    }
    // log C does not depend on O; only the data term moves.
    let f0 = data_term(theta, gamma, o, stats);
    let slope = 0.5 * vhat_norm * vhat_norm;
    let mut t = initial_step;
    for _ in 0..MAX_HALVINGS {
        let candidate = rotate(&v, t, o);
        let f = data_term(theta, gamma, &candidate, stats);
        if f <= f0 - armijo * t * slope && f < f0 {
            return FrameStep {
                o: candidate,
                vhat_norm,
                decrease: f0 - f,
                step: t,
            };
        }
        t *= shrink;
    }
    unchanged
}

/// One line-searched descent step for the frame O with (θ, γ) held fixed.
///
/// Returns the new frame (the old one if no decrease was found) and `‖v‖_F`
/// of the skew gradient at the input frame.
pub fn frame_update(
    theta: &[f64],
    gamma: &[f64],
    o: &DMatrix<f64>,
    stats: &SufficientStats,
) -> Result<(DMatrix<f64>, f64)> {
    let p = stats.dim();
    if theta.len() != p || gamma.len() != p {
        return Err(FbError::Domain(format!(
            "parameter lengths must equal p = {p}"
        )));
    }
    check_frame(o, p)?;
    let step = frame_step(theta, gamma, o, stats, DEFAULT_SHRINK, DEFAULT_ARMIJO, 1.0);
    Ok((step.o, step.vhat_norm))
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_stats(p: usize, rng: &mut ChaCha8Rng) -> SufficientStats {
        let g = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        let a = &g * g.transpose();
        let a = &a / a.trace();
        let b = DVector::from_fn(p, |_, _| 0.3 * (rng.random::<f64>() - 0.5));
        SufficientStats { a, b, n: 100 }
    }

    fn random_orthogonal(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let g = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        rotate(&(&g - g.transpose()), 1.0, &DMatrix::identity(p, p))
    }

    #[test]
    fn skew_by_construction() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let stats = random_stats(4, &mut rng);
        let o = random_orthogonal(4, &mut rng);
        let v = skew_gradient(&[0.0, 1.0, 2.5, 4.0], &[1.0, -2.0, 0.0, 0.5], &o, &stats);
        assert_eq!(&v + v.transpose(), DMatrix::zeros(4, 4));
    }

    #[test]
    fn exponential_stays_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let p = 2 + (rng.random::<f64>() * 6.0) as usize;
            let g = DMatrix::from_fn(p, p, |_, _| 4.0 * (rng.random::<f64>() - 0.5));
            let v = &g - g.transpose();
            let o = random_orthogonal(p, &mut rng);
            let t = rng.random::<f64>();
            let q = rotate(&v, t, &o);
            assert!((&q * q.transpose() - DMatrix::identity(p, p)).amax() < 1e-10);
        }
    }

    #[test]
    fn directional_derivative_matches_skew_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let stats = random_stats(3, &mut rng);
        let o = random_orthogonal(3, &mut rng);
        let (theta, gamma) = ([0.0, 1.5, 3.0], [0.5, -1.0, 2.0]);
        let v = skew_gradient(&theta, &gamma, &o, &stats);
        let g = DMatrix::from_fn(3, 3, |_, _| rng.random::<f64>() - 0.5);
        let dir = &g - g.transpose();
        let h = 1e-6;
        let f = |t: f64| data_term(&theta, &gamma, &((&dir * t).exp() * &o), &stats);
        let fd = (f(h) - f(-h)) / (2.0 * h);
        let predicted = 0.5 * v.dot(&dir);
        assert!((fd - predicted).abs() < 1e-7, "{fd} vs {predicted}");
    }

    #[test]
    fn update_decreases_data_term() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let stats = random_stats(3, &mut rng);
        let o = random_orthogonal(3, &mut rng);
        let (theta, gamma) = ([0.0, 2.0, 5.0], [1.0, 0.0, -1.0]);
        let (o_new, norm) = frame_update(&theta, &gamma, &o, &stats).unwrap();
        assert!(norm > 0.0);
        assert!(data_term(&theta, &gamma, &o_new, &stats) < data_term(&theta, &gamma, &o, &stats));
        assert!((&o_new * o_new.transpose() - DMatrix::identity(3, 3)).amax() < 1e-10);
    }
}
