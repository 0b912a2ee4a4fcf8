//! Dislocation-based crystal-plasticity finite-element simulation of
//! ferrite/martensite dual-phase steel plates under plane-strain tension.

pub mod config;
pub mod constitutive;
pub mod crystal;
pub mod dislocation;
pub mod error;
pub mod fem;
pub mod microstructure;
pub mod postprocess;
pub mod run;
pub mod study;
pub mod tensor;

pub use error::{Error, Result};
