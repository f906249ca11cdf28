//! Maximum-likelihood estimation of (θ, γ) and, optionally, the orthogonal
//! frame O from unit-norm observations.
//!
//! The model for an observation x is `exp(Σ -θ_i y_i² + γ_i y_i) / C(θ, γ)` with
//! `y = O x`. The objective is the negative average log-likelihood, which only
//! depends on the data through `A = mean(x xᵀ)` and `B = mean(x)`.

mod fit;
mod frame;
mod objective;
mod stats;

pub use fit::{fit, FitConfig, FitInit, FitResult, Optimizer};
pub use frame::{frame_update, skew_gradient};
pub use objective::{grad_neg_avg_log_lik, neg_avg_log_lik, ObjectiveGrad};
pub use stats::{sufficient_stats, SufficientStats};
