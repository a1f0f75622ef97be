//! Maximum-likelihood estimation of birth and death rates in general birth-death processes
//! observed at discrete endpoints.

pub mod config;
pub mod em;
pub mod error;
pub mod estep;
pub mod laplace;
pub mod models;
pub mod oracle;
pub mod process;

pub use config::NumericConfig;
pub use error::{BdpError, Result};
