//! Estimation and testing of forecasts whose reported functional is a
//! quantile or expectile at a level that depends on an observed state.
//!
//! The workflow is: load a [`data::ForecastDataset`], build an instrument
//! matrix, fit a [`specmodels::SpecModel`] for the level by two-step GMM
//! ([`gmm::two_step_estimate`]), then test rationality ([`inference::j_test`])
//! or restrictions ([`inference::wald_test`]).

pub mod combine;
pub mod data;
pub mod error;
pub mod functionals;
pub mod gmm;
pub mod inference;
pub mod optim;
pub mod sim;
pub mod special;
pub mod specmodels;

pub use data::{ColumnMap, ForecastDataset, InstrumentMatrix, InstrumentRecipe, StateSource};
pub use error::{Error, Result};
pub use functionals::Family;
pub use gmm::{two_step_estimate, GmmFit, GmmOptions};
pub use inference::{j_test, wald_test, TestResult};
pub use specmodels::{Link, SpecModel};
