//! Multistate Landau-Zener models with linear time dependence.
//!
//! The crate represents Hamiltonians `H(t) = A + B t` in the diabatic basis,
//! checks the two integrability conditions (zero-area cycles in the level
//! diagram and exact crossings at uncoupled intersections), assembles the
//! semiclassical matrix-product solution, builds fermionic and bosonic Fock
//! sectors, and integrates the Schrödinger equation numerically to validate
//! closed-form transition probabilities.

// negated comparisons are how inputs reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ansatz;
pub mod catalog;
pub mod error;
pub mod fock;
pub mod graph;
pub mod ic2;
pub mod matrix;
pub mod model;
pub mod propagate;
pub mod spectrum;

pub use error::{Error, Result};
pub use graph::{build_level_graph, check_ic1, find_crossings, loop_area, CrossingEvent, Cycle, Ic1Report, LevelGraph};
pub use matrix::{AmplitudeMatrix, HermitianMatrix, ProbabilityMatrix};
pub use model::{validate_model, DiabaticModel, GaugeSpec, RawCoupling, RawModel};
pub use spectrum::{adiabatic_spectrum, eigenvalues_at, SpectrumTrack};
pub use propagate::{
    scattering_columns, scattering_matrix_numeric, transition_columns, transition_matrix_numeric, Frame,
    IntegrationConfig,
};
pub use ic2::{check_ic2, effective_coupling, min_gap, projected_connectivity, CrossingVerdict, EffectiveCoupling, Ic2Report};
pub use fock::{
    build_sector_model, do_amplitudes, enumerate_basis, fermion_transition_det, site_occupation, FockSector,
    SecondQuantizedSpec, Statistics,
};
pub use ansatz::{
    ansatz_probabilities, ansatz_scattering, block_bowtie3, block_lz2, block_spin1, crossing_sequence, enumerate_paths,
    has_interference, BlockKind, BowtiePattern, CrossingBlock, SemiclassicalPath,
};
pub use catalog::{
    analytic_columns, analytic_probabilities, make_model, solve_four_state_constraints, CatalogEntry, FourStateBranch,
    Params,
};
