pub mod keyrate;
pub mod mub;
pub mod optics;
pub mod simulate;
