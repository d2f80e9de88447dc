//! Fixtures shared by the benchmarks.

use kagome_core::disorder::DisorderModel;
use kagome_core::topology::build_kagome_star;
use kagome_core::units::{ghz, mhz};
use kagome_core::CouplingGraph;

/// Design frequency used throughout the benchmarks.
pub fn omega_r() -> f64 {
    ghz(7.0)
}

/// High-t hopping rate.
pub fn t_high() -> f64 {
    mhz(31.0)
}

pub fn star() -> CouplingGraph {
    build_kagome_star()
}

/// Disorder at a tenth of the hopping rate.
pub fn weak_disorder(n_realizations: usize) -> DisorderModel {
    DisorderModel::new(0.1 * t_high(), 2024, n_realizations)
}
