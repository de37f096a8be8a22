//! Markov additive processes on `{-1,1}^d x R^d`, their Lamperti-type time
//! change into multi-self-similar Markov processes (and back), spectral
//! classification of lifetime and limit behaviour, and a Monte Carlo
//! verification harness.

pub mod cli;
pub mod error;
pub mod io;
pub mod lamperti;
pub mod linalg;
pub mod model;
pub mod reference;
pub mod rng;
pub mod sampler;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
