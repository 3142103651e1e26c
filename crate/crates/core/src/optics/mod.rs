//! Sampled scalar optics for multi-plane light converters.
//!
//! Fields are stored as `ny x nx` complex arrays (row index is `y`, column
//! index is `x`), centred on the optical axis. Mode fields are normalised so
//! that `sum |u|^2 * pitch^2 = 1`.

mod container;
mod field;
mod metrics;
mod modes;
mod mplc;
mod propagation;

pub use container::{read_fields, read_stack, write_fields, write_pgm, write_stack};
pub use field::{GridSpec, OpticalField};
pub use metrics::{SorterMetrics, MEASURED_LOSS_DB_D25, MEASURED_LOSS_DB_D5};
pub use modes::{disk_modes_at, make_aperture_modes, ApertureLayout, Arrangement};
pub use mplc::{
    apply_mask, forward_pass, mean_fidelity, superpose_modes, transfer_matrix, wavefront_match, PhaseMaskStack,
    WavefrontMatch, WavefrontMatchConfig,
};
pub use propagation::{Propagation, Propagator, TransferFunction};

/// Wavelength of the degenerate down-converted photons from a 405 nm pump.
pub const DEFAULT_WAVELENGTH: f64 = 810e-9;
/// Free-space gap between consecutive planes.
pub const DEFAULT_PLANE_SPACING: f64 = 43.5e-3;
pub const DEFAULT_PLANES: usize = 10;
pub const DEFAULT_ITERATIONS: usize = 30;
pub const DEFAULT_APERTURE_RADIUS: f64 = 100e-6;
pub const DEFAULT_APERTURE_SPACING: f64 = 300e-6;
/// Detection fibres (100 um core) approximated as disks of this radius.
pub const DEFAULT_DETECTOR_RADIUS: f64 = 50e-6;
