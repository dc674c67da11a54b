//! Optimal and near-optimal diminishing step-size schedules for SGD on
//! strongly convex objectives.
//!
//! The crate computes the per-step optimal schedule and its minimized bound
//! sequence Z_t, closed-form two-sided bounds on Z_t, the parameter-free
//! candidate schedule 2/(μt + 4L) with its guarantee and optimality-ratio
//! certificate, continuous-time schedule diagnostics, a constructive
//! Gaussian model whose exact rates meet the bounds within constant
//! factors, a deterministic multi-run SGD simulator, and LIBSVM-backed
//! ℓ2-regularized logistic regression for validating the bounds on data.

pub mod approximation;
pub mod compare;
pub mod dataset;
pub mod engine;
mod error;
pub mod model;
pub mod quad;
pub mod recurrence;
pub mod schedule_analysis;
pub mod tightness;

pub use error::{Error, Result};
pub use model::{log_grid, ProblemParams, Schedule, Trace, TracePoint};
pub use recurrence::OptimalPlan;
