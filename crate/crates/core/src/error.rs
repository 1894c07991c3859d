use thiserror::Error;

use crate::admm::SolveError;
use crate::cliquegraph::GraphError;
use crate::instances::{InstanceError, ParseError};
use crate::nmr::NmrError;
use crate::rounding::RoundingError;
use crate::sdpmodel::ModelError;

/// Crate-wide error: every module error converts into it.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Instance(#[from] InstanceError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Rounding(#[from] RoundingError),
    #[error(transparent)]
    Nmr(#[from] NmrError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
