pub mod cluster_analysis;
pub mod downfolding;
pub mod dynamics;
pub mod ecc;
pub mod error;
pub mod export;
pub mod fock_space;
pub mod imaginary_time;
pub mod operators;
pub mod random;
pub mod sweeps;

pub use error::{Error, Result};
