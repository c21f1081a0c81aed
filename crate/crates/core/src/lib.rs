pub mod cli;
pub mod error;
pub mod estimator;
pub mod experiments;
pub mod gumbel;
pub mod nn;
pub mod solvers;
pub mod structure;
pub mod verify;

pub use error::{Error, Result};
