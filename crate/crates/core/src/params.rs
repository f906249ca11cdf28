//! Parameterizations of the Fisher–Bingham family and the symmetry reductions
//! used by every downstream computation.
//!
//! The density on the unit sphere S^{p-1} is proportional to
//! `exp(-x'Σ⁻¹x/2 + x'Σ⁻¹μ)`. Rotating into the eigenframe of Σ reduces the
//! `p² + p` parameters to the canonical pair (θ, γ) with
//! `exp(Σ_i -θ_i y_i² + γ_i y_i)`, `y = O x`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{FbError, Result};

/// Mean and covariance of the Gaussian whose restriction to the sphere defines
/// the distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FullParams {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
}

impl FullParams {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = mu.len();
        if p < 2 {
            return Err(FbError::Domain(format!(
                "dimension must be at least 2, got {p}"
            )));
        }
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(FbError::Domain(format!(
                "sigma is {}x{}, expected {p}x{p}",
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        if mu.iter().chain(sigma.iter()).any(|v| !v.is_finite()) {
            return Err(FbError::Domain("mu and sigma must be finite".into()));
        }
        let scale = sigma.amax();
        for i in 0..p {
            for j in 0..i {
                if (sigma[(i, j)] - sigma[(j, i)]).abs() > 1e-12 * scale {
                    return Err(FbError::Domain(format!(
                        "sigma is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(Self { mu, sigma })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    /// The exponent `-x'Σ⁻¹x/2 + x'Σ⁻¹μ` evaluated directly from (μ, Σ).
    pub fn exponent(&self, x: &[f64]) -> Result<f64> {
        let chol = self
            .sigma
            .clone()
            .cholesky()
            .ok_or_else(|| FbError::Domain("sigma is not positive definite".into()))?;
        let x = DVector::from_column_slice(x);
        let sinv_x = chol.solve(&x);
        Ok(-0.5 * x.dot(&sinv_x) + sinv_x.dot(&self.mu))
    }
}

/// Diagonal-frame parameters: density ∝ `exp(Σ_i -θ_i x_i² + γ_i x_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    theta: Vec<f64>,
    gamma: Vec<f64>,
}

impl CanonicalParams {
    pub fn new(theta: Vec<f64>, gamma: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(FbError::Domain("theta must not be empty".into()));
        }
        if theta.len() != gamma.len() {
            return Err(FbError::Domain(format!(
                "theta has length {} but gamma has length {}",
                theta.len(),
                gamma.len()
            )));
        }
        if let Some(i) = theta.iter().chain(&gamma).position(|v| !v.is_finite()) {
            return Err(FbError::Domain(format!(
                "non-finite parameter at position {i}"
            )));
        }
        Ok(Self { theta, gamma })
    }

    /// Uniform distribution on S^{p-1}.
    pub fn uniform(p: usize) -> Self {
        Self {
            theta: vec![0.0; p],
            gamma: vec![0.0; p],
        }
    }

    /// Bingham parameters (γ = 0).
    pub fn bingham(theta: Vec<f64>) -> Result<Self> {
        let p = theta.len();
        Self::new(theta, vec![0.0; p])
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn dim(&self) -> usize {
        self.theta.len()
    }

    pub fn min_theta(&self) -> f64 {
        self.theta.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Unnormalized log density `Σ -θ_i x_i² + γ_i x_i`.
    pub fn log_kernel(&self, x: &[f64]) -> f64 {
        self.theta
            .iter()
            .zip(&self.gamma)
            .zip(x)
            .map(|((t, g), xi)| -t * xi * xi + g * xi)
            .sum()
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.theta, self.gamma)
    }
}

/// Output of [`shift_normalize`].
#[derive(Debug, Clone, PartialEq)]
pub struct ShiftNormalized {
    /// Parameters with `min θ = 0` and `γ ≥ 0`.
    pub params: CanonicalParams,
    /// The translation `c = min θ` that was removed; `C(orig) = e^{-c} C(normalized)`.
    pub shift: f64,
    /// `-1` where γ_i was negative and has been reflected, `+1` otherwise.
    pub sign_flips: Vec<f64>,
}

/// Move θ into the gauge `min θ = 0` and reflect coordinates so that γ ≥ 0.
///
/// Neither reduction changes the distribution; the normalizing constant
/// changes by the factor `e^{-shift}`.
pub fn shift_normalize(params: &CanonicalParams) -> ShiftNormalized {
    let shift = params.min_theta();
    let theta = params.theta.iter().map(|t| t - shift).collect();
    let sign_flips: Vec<f64> = params
        .gamma
        .iter()
        .map(|&g| if g < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let gamma = params.gamma.iter().map(|g| g.abs()).collect();
    ShiftNormalized {
        params: CanonicalParams { theta, gamma },
        shift,
        sign_flips,
    }
}

/// Canonical parameters together with the rotation into their frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDecomposition {
    pub canonical: CanonicalParams,
    /// Rows are the eigenvectors of Σ; canonical coordinates are `y = O x`.
    pub orthogonal: DMatrix<f64>,
    /// Additive constant carried alongside the canonical exponent.
    pub log_scale: f64,
}

impl FrameDecomposition {
    /// `log_scale + Σ -θ_i y_i² + γ_i y_i` with `y = O x`.
    pub fn exponent(&self, x: &[f64]) -> f64 {
        let y = &self.orthogonal * DVector::from_column_slice(x);
        self.log_scale + self.canonical.log_kernel(y.as_slice())
    }

    /// Apply [`shift_normalize`], pushing the reflections into the rows of O and
    /// the θ shift into `log_scale`, so [`Self::exponent`] is unchanged on the sphere.
    pub fn normalized(&self) -> Self {
        let norm = shift_normalize(&self.canonical);
        let mut orthogonal = self.orthogonal.clone();
        for (i, &s) in norm.sign_flips.iter().enumerate() {
            if s < 0.0 {
                orthogonal.row_mut(i).neg_mut();
            }
        }
        Self {
            canonical: norm.params,
            orthogonal,
            log_scale: self.log_scale - norm.shift,
        }
    }
}

/// Rotate (μ, Σ) into the eigenframe of Σ.
///
/// Coordinates are ordered by descending variance (ascending θ); each eigenvector's
/// first non-negligible entry is made positive so the frame is deterministic.
pub fn from_mean_covariance(full: &FullParams) -> Result<FrameDecomposition> {
    let p = full.dim();
    let sym = (&full.sigma + full.sigma.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));

    let min_eig = eig.eigenvalues.min();
    if !(min_eig > 0.0) {
        return Err(FbError::Domain(format!(
            "sigma is not positive definite (smallest eigenvalue {min_eig:e})"
        )));
    }

    let mut orthogonal = DMatrix::zeros(p, p);
    let mut variances = Vec::with_capacity(p);
    for (row, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        let pivot = v.iter().copied().find(|c| c.abs() > 1e-12).unwrap_or(1.0);
        if pivot < 0.0 {
            v.neg_mut();
        }
        orthogonal.set_row(row, &v.transpose());
        variances.push(eig.eigenvalues[k]);
    }

    let rotated_mu = &orthogonal * &full.mu;
    let theta = variances.iter().map(|d2| 0.5 / d2).collect();
    let gamma = rotated_mu
        .iter()
        .zip(&variances)
        .map(|(m, d2)| m / d2)
        .collect();
    Ok(FrameDecomposition {
        canonical: CanonicalParams::new(theta, gamma)?,
        orthogonal,
        log_scale: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{RngExt, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(p: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let m = DMatrix::from_fn(p, p, |_, _| rng.random::<f64>() - 0.5);
        m.qr().q()
    }

    fn random_unit(p: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let v: Vec<f64> = (0..p).map(|_| rng.random::<f64>() - 0.5).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter().map(|x| x / n).collect()
    }

    #[test]
    fn identity_covariance() {
        let full = FullParams::new(DVector::zeros(3), DMatrix::identity(3, 3)).unwrap();
        let dec = from_mean_covariance(&full).unwrap();
        assert_eq!(dec.canonical.theta(), &[0.5, 0.5, 0.5]);
        assert_eq!(dec.canonical.gamma(), &[0.0, 0.0, 0.0]);
        assert!((&dec.orthogonal - DMatrix::<f64>::identity(3, 3)).amax() < 1e-15);
        assert_eq!(dec.log_scale, 0.0);
    }

    #[test]
    fn diagonal_covariance_with_mean() {
        let full = FullParams::new(
            DVector::from_vec(vec![1.0, 1.0]),
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.25])),
        )
        .unwrap();
        let dec = from_mean_covariance(&full).unwrap();
        let th = dec.canonical.theta();
        let ga = dec.canonical.gamma();
        assert!((th[0] - 1.0).abs() < 1e-14 && (th[1] - 2.0).abs() < 1e-14);
        assert!((ga[0] - 2.0).abs() < 1e-14 && (ga[1] - 4.0).abs() < 1e-14);
        assert!((&dec.orthogonal - DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn rotated_covariance_reconstructs_exponent() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for p in [2, 3, 5] {
            let r = random_rotation(p, &mut rng);
            let diag: Vec<f64> = (0..p).map(|i| 0.3 + i as f64 * 0.7).collect();
            let sigma = r.transpose() * DMatrix::from_diagonal(&DVector::from_vec(diag)) * &r;
            let sigma = (&sigma + sigma.transpose()) * 0.5;
            let mu = DVector::from_fn(p, |_, _| rng.random::<f64>() * 2.0 - 1.0);
            let full = FullParams::new(mu, sigma).unwrap();
            let dec = from_mean_covariance(&full).unwrap();

            let oto = dec.orthogonal.transpose() * &dec.orthogonal;
            assert!((oto - DMatrix::<f64>::identity(p, p)).amax() < 1e-10);

            let normalized = dec.normalized();
            for _ in 0..20 {
                let x = random_unit(p, &mut rng);
                let want = full.exponent(&x).unwrap();
                assert!((dec.exponent(&x) - want).abs() < 1e-8);
                assert!((normalized.exponent(&x) - want).abs() < 1e-8);
            }
            assert!(normalized.canonical.gamma().iter().all(|&g| g >= 0.0));
        }
    }

    #[test]
    fn rejects_bad_covariances() {
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            FullParams::new(DVector::zeros(2), asym),
            Err(FbError::Domain(_))
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        let full = FullParams::new(DVector::zeros(2), indefinite).unwrap();
        assert!(matches!(
            from_mean_covariance(&full),
            Err(FbError::Domain(_))
        ));
        assert!(FullParams::new(DVector::zeros(1), DMatrix::identity(1, 1)).is_err());
    }

    #[test]
    fn shift_normalize_example() {
        let p = CanonicalParams::new(vec![3.0, 4.0, 5.0], vec![1.0, -2.0, 0.0]).unwrap();
        let n = shift_normalize(&p);
        assert_eq!(n.params.theta(), &[0.0, 1.0, 2.0]);
        assert_eq!(n.params.gamma(), &[1.0, 2.0, 0.0]);
        assert_eq!(n.shift, 3.0);
        assert_eq!(n.sign_flips, vec![1.0, -1.0, 1.0]);
    }

    #[test]
    fn shift_normalize_canonical_is_fixed_point() {
        let p = CanonicalParams::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let n = shift_normalize(&p);
        assert_eq!(n.params, p);
        assert_eq!(n.shift, 0.0);
    }

    #[test]
    fn canonical_validation() {
        assert!(CanonicalParams::new(vec![0.0, 1.0], vec![0.0]).is_err());
        assert!(CanonicalParams::new(vec![0.0, f64::NAN], vec![0.0, 0.0]).is_err());
        assert!(CanonicalParams::new(vec![], vec![]).is_err());
    }

    proptest::proptest! {
        #[test]
        fn shift_normalize_is_idempotent(
            theta in proptest::collection::vec(-20.0f64..20.0, 2..8),
            seed in 0u64..1000,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let gamma = theta.iter().map(|_| rng.random::<f64>() * 10.0 - 5.0).collect();
            let p = CanonicalParams::new(theta, gamma).unwrap();
            let once = shift_normalize(&p);
            let twice = shift_normalize(&once.params);
            proptest::prop_assert_eq!(&twice.params, &once.params);
            proptest::prop_assert_eq!(twice.shift, 0.0);
            proptest::prop_assert!(once.params.min_theta() == 0.0);
        }
    }
}
