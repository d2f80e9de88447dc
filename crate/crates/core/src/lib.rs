//! Normal-mode analysis of capacitively coupled microwave resonator arrays.
//!
//! The crate covers the full pipeline for a kagome-star array of twelve
//! coplanar waveguide resonators:
//!
//! * [`topology`] builds and validates coupling graphs,
//! * [`spectrum`] assembles the one-excitation tight-binding Hamiltonian,
//!   diagonalizes it and computes mode-frequency sensitivities to site disorder,
//! * [`circuit`] maps circuit quantities (capacitances, inductances) onto model
//!   parameters,
//! * [`disorder`] runs Monte Carlo disorder ensembles and the two disorder
//!   estimators,
//! * [`transmission`] synthesizes |S21| traces and extracts peak positions,
//! * [`formats`] holds the CSV/JSON file schemas shared with the CLI.
//!
//! Frequencies are angular (rad/s) everywhere inside the crate. Anything that
//! leaves the crate through [`formats`] is reported in Hz.

pub mod circuit;
pub mod disorder;
pub mod formats;
pub mod linalg;
pub mod rng;
pub mod signal;
pub mod spectrum;
pub mod topology;
pub mod transmission;
pub mod units;

pub use circuit::{CircuitError, DeviceParams, InductanceModel, PowerLawInductance};
pub use disorder::{
    DisorderError, DisorderEstimate, DisorderModel, EstimateFlag, EstimatorMethod, ModeHistogram,
};
pub use linalg::{LinalgError, SymMatrix};
pub use spectrum::{HamiltonianSpec, ModeSpectrum, SpectrumError};
pub use topology::{CouplingGraph, SiteId, TopologyError};
pub use transmission::{PeakList, TransmissionError, TransmissionTrace};
