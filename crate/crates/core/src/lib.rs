pub mod cli;
pub mod config;
pub mod crlb;
pub mod error;
pub mod estimators;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod model;
pub mod quadrature;
pub mod radiometric;
pub mod rng;
pub mod rootfind;
pub mod simulator;
pub mod verify;

pub use error::{Error, Result};
