//! Model predictive control coupled with robust state estimation.
//!
//! The controller is the usual unconstrained receding-horizon law; robustness
//! comes from the estimator that feeds it. [`filters`] provides the Kalman
//! filter, a filter that is minimax over a Kullback–Leibler ball around the
//! nominal one-step model, a risk-sensitive filter and a τ-divergence variant,
//! all sharing one recursion. [`servo`] is a nonlinear servomechanism used as
//! the benchmark plant and [`experiments`] drives the comparison campaigns.

// `!(x > 0.0)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiments;
pub mod filters;
pub mod linalg;
pub mod model;
pub mod mpc;
pub mod servo;

pub use error::{Error, Result};
pub use filters::{FilterState, FilterVariant};
pub use linalg::{Matrix, Vector};
pub use model::{zoh_discretize, ContinuousModel, GaussianBelief, LinearModel};
pub use mpc::{build_predictor, closed_loop, control_law, ClosedLoopTrace, MpcConfig, Plant, PredictorMatrices};
pub use servo::{NoiseConfig, PlantState, ServoParams};
