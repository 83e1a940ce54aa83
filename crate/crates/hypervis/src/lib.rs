//! Experiment harness for visibility in hyperbolic Boolean models and
//! Poisson hyperplane tessellations: configuration, dispatch, result
//! emission, Poincaré-disk rendering and the acceptance suite.

pub mod config;
pub mod emit;
pub mod render;
pub mod run;
pub mod verify;

use hypervis_core::closedform::ClosedFormError;
use hypervis_core::procsim::SimError;
use hypervis_core::stats::StatsError;
use thiserror::Error;

pub use config::{ExperimentConfig, Method, Quantity};
pub use run::{run, Outcome};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    ClosedForm(#[from] ClosedFormError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("file error: {0}")]
    Io(#[from] std::io::Error),
}
