//! Monte Carlo laboratory for occupational skill prices under a Roy model
//! with skill accumulation: career simulation, regression designs, and the
//! estimators that recover price paths and accumulation rates from panels.

pub mod cli;
pub mod descriptives;
pub mod design;
pub mod dgp;
pub mod error;
pub mod estimators;
pub mod experiment;
pub mod linalg;
pub mod panel;
pub mod params;
pub mod truncnorm;

pub use error::{Error, Result};
