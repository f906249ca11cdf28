//! Independent reference values: the closed-form complex-Bingham constant,
//! plain Monte Carlo over the sphere, and the quadrature at a larger node count.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FbError, Result};
use crate::normconst::{norm_const, QuadSettings};
use crate::params::CanonicalParams;
use crate::sampler::{for_each_proposal, BLOCK_SIZE};

/// Smallest admissible gap between complex-Bingham coefficients.
pub const MIN_COMPLEX_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub stderr: f64,
    pub n_samples: u64,
    pub seed: u64,
}

/// Normalizing constant of the complex Bingham distribution on the unit sphere
/// of C^p, by partial fractions: `2π^p Σ_j e^{-θ_j} / Π_{k≠j} (θ_k - θ_j)`.
pub fn complex_bingham_exact(theta_c: &[f64]) -> Result<f64> {
    let p = theta_c.len();
    if p < 2 {
        return Err(FbError::Domain(format!(
            "complex dimension must be >= 2, got {p}"
        )));
    }
    if theta_c.iter().any(|t| !t.is_finite()) {
        return Err(FbError::Domain("non-finite coefficient".into()));
    }
    for j in 0..p {
        for k in j + 1..p {
            if (theta_c[j] - theta_c[k]).abs() < MIN_COMPLEX_GAP {
                return Err(FbError::Conditioning(format!(
                    "coefficients {j} and {k} differ by less than {MIN_COMPLEX_GAP:e}"
                )));
            }
        }
    }
    let min = theta_c.iter().copied().fold(f64::INFINITY, f64::min);
    let sum: f64 = (0..p)
        .map(|j| {
            let denom: f64 = (0..p)
                .filter(|&k| k != j)
                .map(|k| theta_c[k] - theta_c[j])
                .product();
            (-(theta_c[j] - min)).exp() / denom
        })
        .sum();
    Ok(2.0 * PI.powi(p as i32) * (-min).exp() * sum)
}

/// Real coefficients equivalent to a complex Bingham: each entry duplicated.
pub fn complex_to_real_theta(theta_c: &[f64]) -> Vec<f64> {
    theta_c.iter().flat_map(|&t| [t, t]).collect()
}

/// Surface area of S^{p-1} by the two-step recurrence (exact for p = 3: 4π).
fn sphere_area(p: usize) -> f64 {
    let mut area = if p.is_multiple_of(2) { 2.0 * PI } else { 2.0 };
    let mut k = if p.is_multiple_of(2) { 2 } else { 1 };
    while k < p {
        area *= 2.0 * PI / k as f64;
        k += 2;
    }
    area
}

#[derive(Clone, Copy)]
struct Welford {
    n: f64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1.0;
        let delta = x - self.mean;
        self.mean += delta / self.n;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if self.n == 0.0 {
            return other;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        Self {
            n,
            mean: self.mean + delta * other.n / n,
            m2: self.m2 + other.m2 + delta * delta * self.n * other.n / n,
        }
    }
}

/// Plain Monte Carlo estimate of `C(θ, γ)` from uniform sphere points.
///
/// Samples come from the same block-keyed streams as the sampler, and block
/// summaries are merged in block order, so the result does not depend on the
/// number of threads.
pub fn mc_sphere_estimate(
    params: &CanonicalParams,
    n_samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples < 1000 {
        return Err(FbError::Domain(format!(
            "need at least 1000 samples, got {n_samples}"
        )));
    }
    let p = params.dim();
    if p < 2 {
        return Err(FbError::Domain("sphere dimension p must be >= 2".into()));
    }
    let blocks = n_samples.div_ceil(BLOCK_SIZE);
    let partials: Vec<Welford> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let count = BLOCK_SIZE.min(n_samples - b * BLOCK_SIZE);
            let mut acc = Welford {
                n: 0.0,
                mean: 0.0,
                m2: 0.0,
            };
            for_each_proposal(seed, b, count, p, |_, x, _| {
                acc.push(params.log_kernel(x).exp())
            });
            acc
        })
        .collect();
    let total = partials
        .into_iter()
        .reduce(Welford::merge)
        .expect("at least one block");
    let area = sphere_area(p);
    let n = total.n;
    let sd = (total.m2 / (n - 1.0)).max(0.0).sqrt();
    Ok(McEstimate {
        estimate: area * total.mean,
        stderr: area * sd / n.sqrt(),
        n_samples,
        seed,
    })
}

/// The quadrature at `n_big` nodes per side with otherwise unchanged settings.
pub fn reference_quadrature(
    params: &CanonicalParams,
    n_big: usize,
    quad: &QuadSettings,
) -> Result<f64> {
    if n_big < 4 * quad.n_points {
        return Err(FbError::Config(format!(
            "reference node count {n_big} is below 4 x {}",
            quad.n_points
        )));
    }
    let r = norm_const(params, &quad.with_points(n_big))?;
    Ok(r.log_value.exp())
}
