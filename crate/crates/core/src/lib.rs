pub mod cli;
pub mod data;
pub mod distill;
pub mod error;
pub mod fourier;
pub mod gam;
pub mod harness;
pub mod indices;
pub mod learners;
pub mod synthetic;
mod linalg;

pub use error::{Error, Result};
