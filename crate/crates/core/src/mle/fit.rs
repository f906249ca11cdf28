use std::collections::VecDeque;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::frame::{frame_step, skew_gradient};
use super::objective::{check_frame, grad_neg_avg_log_lik, ObjectiveGrad};
use super::stats::SufficientStats;
use crate::error::{FbError, Result};
use crate::normconst::QuadSettings;

const MAX_HALVINGS: usize = 60;
const MAX_STEP: f64 = 1e6;
const LBFGS_MEMORY: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// Alternating θ and γ steepest-descent steps.
    #[default]
    GradientDescent,
    /// Limited-memory BFGS on the joint (θ, γ) vector.
    QuasiNewton,
}

/// Starting point; `o = None` means the identity frame.
#[derive(Debug, Clone, PartialEq)]
pub struct FitInit {
    pub theta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub o: Option<DMatrix<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub max_iter: usize,
    /// Stop when the sup-norm of the gradient (and `‖v‖_F` of the frame
    /// gradient, when the frame is optimized) falls below this.
    pub grad_tol: f64,
    /// Backtracking factor in (0, 1).
    pub shrink: f64,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    pub optimize_frame: bool,
    pub optimizer: Optimizer,
    /// Defaults to θ = γ = 0, O = I.
    pub init: Option<FitInit>,
    pub quad: QuadSettings,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            max_iter: 5000,
            grad_tol: 1e-6,
            shrink: 0.5,
            armijo: 1e-4,
            optimize_frame: false,
            optimizer: Optimizer::default(),
            init: None,
            quad: QuadSettings::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    /// θ as iterated; its sum is fixed by the initialization.
    pub theta_hat: Vec<f64>,
    /// θ shifted so that its minimum is 0.
    pub theta_aligned: Vec<f64>,
    pub gamma_hat: Vec<f64>,
    pub o_hat: DMatrix<f64>,
    /// Objective at the start and after every iteration.
    pub objective_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    /// Sup-norm of the (θ, γ) gradient at the returned point.
    pub final_grad_norm: f64,
    /// `‖v‖_F` of the frame gradient at the returned point.
    pub vhat_norm: f64,
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Problem<'a> {
    stats: &'a SufficientStats,
    config: &'a FitConfig,
    o: DMatrix<f64>,
}

impl Problem<'_> {
    /// Objective and gradient at a trial point; failures count as rejections.
    fn trial(&self, theta: &[f64], gamma: &[f64]) -> Option<ObjectiveGrad> {
        self.grad(theta, gamma).ok().filter(|g| g.value.is_finite())
    }

    fn grad(&self, theta: &[f64], gamma: &[f64]) -> Result<ObjectiveGrad> {
        grad_neg_avg_log_lik(theta, gamma, &self.o, self.stats, &self.config.quad)
    }

    /// Backtracking from `step` along `x + s·dir` until the Armijo condition
    /// `f(x + s·dir) ≤ f0 + c·s·slope` holds with a strict decrease.
    fn line_search<F>(
        &self,
        f0: f64,
        slope: f64,
        mut step: f64,
        eval: F,
    ) -> Option<(f64, ObjectiveGrad)>
    where
        F: Fn(f64) -> Option<ObjectiveGrad>,
    {
        if !(slope < 0.0) {
            return None;
        }
        for _ in 0..MAX_HALVINGS {
            if let Some(g) = eval(step) {
                if g.value <= f0 + self.config.armijo * step * slope && g.value < f0 {
                    return Some((step, g));
                }
            }
            step *= self.config.shrink;
        }
        None
    }
}

fn axpy(x: &[f64], s: f64, d: &[f64]) -> Vec<f64> {
    x.iter().zip(d).map(|(a, b)| a + s * b).collect()
}

/// Two-loop recursion for `-H g`.
fn lbfgs_direction(g: &[f64], memory: &VecDeque<(Vec<f64>, Vec<f64>)>) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y) in memory.iter().rev() {
        let rho = 1.0 / dot(y, s);
        let alpha = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= alpha * yi);
        alphas.push((alpha, rho));
    }
    if let Some((s, y)) = memory.back() {
        let scale = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|v| *v *= scale);
    }
    for ((s, y), (alpha, rho)) in memory.iter().zip(alphas.into_iter().rev()) {
        let beta = rho * dot(y, &q);
        q.iter_mut()
            .zip(s)
            .for_each(|(qi, si)| *qi += (alpha - beta) * si);
    }
    q.iter_mut().for_each(|v| *v = -*v);
    q
}

fn validate(config: &FitConfig) -> Result<()> {
    if config.max_iter < 1 {
        return Err(FbError::Config("max_iter must be >= 1".into()));
    }
    if !(config.grad_tol > 0.0) {
        return Err(FbError::Config("grad_tol must be positive".into()));
    }
    if !(config.shrink > 0.0 && config.shrink < 1.0) {
        return Err(FbError::Config("shrink must lie in (0, 1)".into()));
    }
    if !(config.armijo > 0.0 && config.armijo < 1.0) {
        return Err(FbError::Config("armijo constant must lie in (0, 1)".into()));
    }
    Ok(())
}

/// Minimize the negative average log-likelihood.
///
/// Each iteration takes a backtracking step in θ, then in γ (gradient descent)
/// or one joint L-BFGS step, followed by a frame step when enabled. Every
/// accepted step strictly decreases the objective.
pub fn fit(stats: &SufficientStats, config: &FitConfig) -> Result<FitResult> {
    validate(config)?;
    let p = stats.dim();
    let (mut theta, mut gamma, o) = match &config.init {
        Some(init) => (
            init.theta.clone(),
            init.gamma.clone(),
            init.o.clone().unwrap_or_else(|| DMatrix::identity(p, p)),
        ),
        None => (vec![0.0; p], vec![0.0; p], DMatrix::identity(p, p)),
    };
    if theta.len() != p || gamma.len() != p {
        return Err(FbError::Domain(format!(
            "initial parameters must have length p = {p}"
        )));
    }
    check_frame(&o, p)?;
    let mut problem = Problem { stats, config, o };

    let mut g = problem.grad(&theta, &gamma)?;
    let mut trace = vec![g.value];
    let mut step_theta = 1.0;
    let mut step_gamma = 1.0;
    let mut step_frame = 1.0;
    let mut memory: VecDeque<(Vec<f64>, Vec<f64>)> = VecDeque::new();
    let mut iterations = 0;
    let mut converged = false;

    let frame_norm = |theta: &[f64], gamma: &[f64], o: &DMatrix<f64>| {
        if config.optimize_frame {
            skew_gradient(theta, gamma, o, stats).norm()
        } else {
            0.0
        }
    };
    let mut vhat_norm = frame_norm(&theta, &gamma, &problem.o);

    while iterations < config.max_iter {
        if sup_norm(&g.theta).max(sup_norm(&g.gamma)) < config.grad_tol
            && vhat_norm < config.grad_tol
        {
            converged = true;
            break;
        }
        iterations += 1;
        let mut progressed = false;

        match config.optimizer {
            Optimizer::GradientDescent => {
                let slope = -dot(&g.theta, &g.theta);
                let gamma_now = gamma.clone();
                let accepted = problem.line_search(g.value, slope, step_theta, |s| {
                    problem.trial(&axpy(&theta, -s, &g.theta), &gamma_now)
                });
                if let Some((s, g_new)) = accepted {
                    theta = axpy(&theta, -s, &g.theta);
                    step_theta = (2.0 * s).min(MAX_STEP);
                    g = g_new;
                    progressed = true;
                }
                let slope = -dot(&g.gamma, &g.gamma);
                let theta_now = theta.clone();
                let accepted = problem.line_search(g.value, slope, step_gamma, |s| {
                    problem.trial(&theta_now, &axpy(&gamma, -s, &g.gamma))
                });
                if let Some((s, g_new)) = accepted {
                    gamma = axpy(&gamma, -s, &g.gamma);
                    step_gamma = (2.0 * s).min(MAX_STEP);
                    g = g_new;
                    progressed = true;
                }
            }
            Optimizer::QuasiNewton => {
                let x: Vec<f64> = theta.iter().chain(&gamma).copied().collect();
                let gx: Vec<f64> = g.theta.iter().chain(&g.gamma).copied().collect();
                let mut accepted = None;
                for attempt in 0..2 {
                    let mut dir = lbfgs_direction(&gx, &memory);
                    let mut slope = dot(&gx, &dir);
                    if !(slope < 0.0) || attempt == 1 {
                        memory.clear();
                        dir = gx.iter().map(|v| -v).collect();
                        slope = dot(&gx, &dir);
                    }
                    let found = problem.line_search(g.value, slope, 1.0, |s| {
                        let xn = axpy(&x, s, &dir);
                        problem.trial(&xn[..p], &xn[p..])
                    });
                    if let Some((s, g_new)) = found {
                        accepted = Some((axpy(&x, s, &dir), g_new));
                        break;
                    }
                    if memory.is_empty() {
                        break;
                    }
                }
                if let Some((xn, g_new)) = accepted {
                    theta = xn[..p].to_vec();
                    gamma = xn[p..].to_vec();
                    let s: Vec<f64> = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
                    let y: Vec<f64> = g_new
                        .theta
                        .iter()
                        .chain(&g_new.gamma)
                        .zip(&gx)
                        .map(|(a, b)| a - b)
                        .collect();
                    let sy = dot(&s, &y);
                    if sy > 1e-12 * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
                        if memory.len() == LBFGS_MEMORY {
                            memory.pop_front();
                        }
                        memory.push_back((s, y));
                    }
                    g = g_new;
                    progressed = true;
                }
            }
        }

        if config.optimize_frame {
            let step = frame_step(
                &theta,
                &gamma,
                &problem.o,
                stats,
                config.shrink,
                config.armijo,
                step_frame,
            );
            if step.decrease > 0.0 {
                problem.o = step.o;
                step_frame = (2.0 * step.step).min(MAX_STEP);
                g = problem.grad(&theta, &gamma)?;
                progressed = true;
            }
            vhat_norm = frame_norm(&theta, &gamma, &problem.o);
        }

        if !progressed {
            return Err(FbError::Stagnation {
                iterations,
                objective: g.value,
                theta,
                gamma,
            });
        }
        trace.push(g.value);
    }

    if !converged {
        converged = sup_norm(&g.theta).max(sup_norm(&g.gamma)) < config.grad_tol
            && vhat_norm < config.grad_tol;
    }
    let min = theta.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(FitResult {
        theta_aligned: theta.iter().map(|t| t - min).collect(),
        theta_hat: theta,
        gamma_hat: gamma,
        o_hat: problem.o,
        objective_trace: trace,
        iterations,
        converged,
        final_grad_norm: sup_norm(&g.theta).max(sup_norm(&g.gamma)),
        vhat_norm,
    })
}
