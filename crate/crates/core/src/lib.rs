//! Semiparametric estimation of a location shift between two samples under
//! a log-concavity constraint.
//!
//! The pipeline: centre both samples by their means, pool the residuals, fit
//! the log-concave maximum-likelihood density ([`lcmle`]), smooth it with a
//! Gaussian kernel whose bandwidth follows from the fitted variance
//! ([`smoothing`]), and apply a one-step correction built from the smoothed
//! score ([`shift`]). [`scenarios`] and [`metrics`] support simulation studies.
//!
//! All numerical types are generic over [`Real`]; the aliases below fix the
//! scalar to `f64`.

// `!(x > 0)` guards are meant to reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod lcmle;
pub mod metrics;
pub mod num;
pub mod optim;
pub mod quad;
pub mod scenarios;
pub mod shift;
pub mod smoothing;
pub mod special;

pub use error::{Error, Result};
pub use num::Real;

pub type WeightedSample = lcmle::WeightedSample<f64>;
pub type LogConcaveDensity = lcmle::PiecewiseLogLinearDensity<f64>;
pub type SmoothedDensity = smoothing::SmoothedDensity<f64>;
pub type TwoSample = shift::TwoSample<f64>;
pub type PreliminaryEstimates = shift::PreliminaryEstimates<f64>;
pub type ShiftEstimate = shift::ShiftEstimate<f64>;

pub use metrics::{summarize, McSummary};
pub use scenarios::Scheme;
pub use shift::{diff_of_means, fisher_info, one_step, preliminary, ScoreModel};
