//! High-dimensional quantum key distribution toolkit: mutually unbiased
//! bases, multi-plane light converter design by wavefront matching, noisy
//! measurement simulation and secure-key-rate bounds.

pub mod error;
pub mod keyrate;
pub mod mub;
pub mod optics;
pub mod protocol;

pub use error::{Error, Result};
