//! Measurement statistics of the pixel-entangled state: ideal tables, the
//! uniform/block-biased noise model, Poisson count sampling, normalisation,
//! error decomposition and round-by-round session simulation.
//!
//! Index conventions follow the joint table `p(a, b | k, l)`: `a` is Bob's
//! outcome, `b` Alice's outcome (the sent state), `k` Alice's basis and `l`
//! Bob's basis. Accessors taking these indices are 1-based.

mod io;
mod noise;
mod sampling;
pub(crate) mod table;

pub use io::{
    read_count_table, read_probability_table, sidecar_path, write_count_table, write_probability_table, TableSidecar,
};
pub use noise::{apply_noise, decompose_errors, BlockAlignment, NoiseDecomposition, NoiseKind, NoiseModel};
pub use sampling::{
    sample_counts, simulate_session, CountSettings, Round, SessionConfig, SessionRecord, COUNT_GENERATOR_ID,
    SESSION_GENERATOR_ID,
};
pub use table::{ideal_prob_table, normalize_counts, CountTable, ProbabilityTable, NORMALIZATION_TOL};
