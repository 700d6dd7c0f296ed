//! Temporal disaggregation of quarterly aggregates to monthly frequency.
//!
//! The crate is organised as a pipeline of small, independently testable
//! modules:
//!
//! - [`series`]: calendar-indexed series and panels, lagging, splitting
//! - [`preprocess`]: stationarity transforms, quarterly aggregation, scaling
//! - [`regressors`]: four interchangeable regression backends
//! - [`reconcile`]: minimum-norm adjustment of monthly paths to quarterly totals
//! - [`evaluate`]: expanding-window backtests, metrics, forecast comparison tests
//! - [`explain`]: Shapley feature attributions
//! - [`theorylab`]: Monte Carlo checks of the regime-bias and ridge-risk results

#![allow(clippy::needless_range_loop)] // shared index walks parallel arrays
#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated compares also reject NaN
#![allow(clippy::type_complexity)]

pub mod error;
pub mod evaluate;
pub mod explain;
pub mod numeric;
pub mod preprocess;
pub mod reconcile;
pub mod regressors;
pub mod series;
pub mod theorylab;

pub use error::{Error, Result};
