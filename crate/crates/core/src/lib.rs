pub mod error;
pub mod jets;
pub mod linalg;

pub use error::{Error, Result};
pub mod kernel;
pub mod quad;
pub mod malliavin;
pub mod sampling;
pub mod scenarios;
pub mod estimators;
pub mod localize;
pub mod geometry;
pub mod cli;
pub mod verify;
