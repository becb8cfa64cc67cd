//! Electronic band structures of tight-binding models on simulated quantum
//! hardware: variational deflation and phase estimation.

pub mod backend;
pub mod bands;
pub mod circuit;
pub mod config;
pub mod error;
pub mod estimation;
pub mod linalg;
pub mod mitigation;
pub mod optimize;
pub mod pauli;
pub mod qpe;
pub mod seed;
pub mod tightbinding;
pub mod vqd;

pub use error::{Error, Result};
