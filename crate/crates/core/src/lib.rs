//! Potential-based stochastic movement models.
//!
//! A track `X_t` in the plane follows `dX = ∇P(X) dt + γ dW`, where `P` is a
//! mixture of Gaussian bumps. The crate estimates `(P, γ)` from irregularly
//! sampled tracks with Euler, Ozaki, Kessler and adaptive Kessler
//! pseudo-likelihoods or an exact-algorithm Monte Carlo EM, and simulates
//! tracks exactly.
//!
//! The math core is generic over the scalar type; the aliases below fix it
//! to `f64`, which is what the estimation layers use.

// Negated comparisons are deliberate: they send NaN down the failure path.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod cli;
pub mod estimate;
pub mod exact;
pub mod linalg;
pub mod potential;
pub mod rng;
pub mod simbench;
pub mod trajectory;
pub mod transition;

pub use estimate::{fit, FitResult, Method, OptimizerConfig};
pub use exact::{ea1_transition_sample, fit_ea_mcem, loglik_estimate, EmConfig};
pub use simbench::{run_study, simulate, Scenario};

pub type Vector2 = linalg::Vec2<f64>;
pub type Matrix2 = linalg::Mat2<f64>;
pub type Component = potential::GaussianComponent<f64>;
pub type Potential = potential::MixturePotential<f64>;
pub type Params = potential::ModelParams<f64>;
pub type Bounds = potential::EaBounds<f64>;
pub type Transition = transition::GaussianTransition<f64>;
pub type Segment = transition::Segment<f64>;
pub type Track = trajectory::Track<f64>;
pub type Trajectories = trajectory::TrajectorySet<f64>;
