//! Variable selection and one-step-ahead forecasting for high-dimensional
//! time-series regressions whose coefficients may drift or break.
//!
//! The crate has three layers:
//!
//! - selectors that pick covariates out of a wide active set after the
//!   conditioning variables are projected out: multiple-testing screening
//!   ([`ocmt`]), the Lasso and its adaptive second stage ([`lasso`]), and
//!   componentwise L2 boosting with a BIC stop ([`boosting`]);
//! - forecasting that refits the selected covariates by least squares,
//!   optionally on exponentially down-weighted observations, and averages
//!   forecasts over a grid of decay rates ([`downweight`], [`forecast`]);
//! - evaluation and simulation: forecast-accuracy tests and selection
//!   scores ([`evaluation`]), and a replication engine for the synthetic
//!   designs used to exercise all of the above ([`dgp`]).
//!
//! [`data`] holds the dataset and selection-outcome types shared by every
//! layer; [`linalg`] and [`normal`] are the small dense-matrix and normal
//! quantile kernels everything leans on.

pub mod boosting;
pub mod data;
pub mod dgp;
pub mod downweight;
pub mod evaluation;
pub mod forecast;
pub mod lasso;
pub mod linalg;
pub mod normal;
pub mod ocmt;

pub use boosting::{boost_select, BoostConfig};
pub use data::{SelectionResult, SelectorTag, TimeSeriesDataset};
pub use dgp::{calibrate_tau_u, run_experiment, DgpConfig, FitTarget, MethodSpec};
pub use downweight::{apply_weights, standard_grid, GridLabel, WeightScheme};
pub use evaluation::{msfe, tpr_fpr, DirectionPanel, LossPanel};
pub use forecast::{grid_forecast, ForecastRecord, Protocol, SelectorSpec};
pub use lasso::{adaptive_lasso_select, lasso_select};
pub use ocmt::{critical_value, ocmt_select, OcmtConfig};
