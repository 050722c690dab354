//! Robust linear regression for right-censored responses.
//!
//! The estimators in this crate extend the classical high-breakdown family
//! (LMS, S, MM, τ) and the M/LS/L1/GM baselines to responses observed as
//! `y* = min(y, c)` with a censoring indicator. Censored residuals are handled
//! through the Kaplan–Meier estimator of the residual distribution, written as
//! a redistribution of each censored point's mass over the uncensored points
//! to its right ([`km`]). Every estimator fits a regression `γ̂(β)` of the
//! censored residuals at a trial `β` and searches for the `β` at which that
//! inner fit is closest to zero ([`estimators`]).
//!
//! Supporting modules cover breakdown-point bounds ([`breakdown`]), a seeded
//! Monte Carlo harness ([`simulation`]) and the command line front end
//! ([`cli`]).

pub mod breakdown;
pub mod cli;
pub mod data;
pub mod error;
pub mod estimators;
pub mod inner;
pub mod km;
pub mod linalg;
pub mod loss;
pub mod rng;
pub mod scale;
pub mod simulation;

pub use data::{residuals, validate, CensoredObservation, CensoredSample, Diagnostics, FitResult, ResidualVector};
pub use error::{Error, Result};
pub use estimators::{Estimator, EstimatorOptions, SearchConfig};
pub use km::{kaplan_meier, RedistributionWeights};
pub use loss::LossFunction;
