//! Carleman-linearized lattice Boltzmann toolkit.
//!
//! The crate bundles four layers that build on one another:
//!
//! * [`lattice`] / [`lbm`] — DdQb velocity sets and the classical lattice
//!   Boltzmann update on periodic grids, in the low-Mach normalization that
//!   makes the collision an exact quadratic polynomial;
//! * [`carleman`] / [`logistic`] — the second-order Carleman linearization of
//!   that collision (sparse relaxation matrix, streaming permutation, a
//!   memory-light evolution path) and the scalar logistic-equation ladder;
//! * [`pauli`] — exact tensor-Pauli expansion of the single-site relaxation
//!   matrix and the truncated-expansion distance curve;
//! * [`circuit`] / [`oracles`] / [`qsim`] — synthesis of the sparse-matrix
//!   block-encoding circuit (value oracle, position oracle with shift and set
//!   operators, comparator) plus the streaming circuit, gate-count reports,
//!   and an exact statevector simulator with post-selection to validate the
//!   block contract and measure success probabilities.

pub mod carleman;
pub mod circuit;
pub mod error;
pub mod lattice;
pub mod lbm;
pub mod logistic;
pub mod oracles;
pub mod pauli;
pub mod qsim;
pub mod sparse;

pub use carleman::{CarlemanState, CarlemanSystem, ErrorStats};
pub use circuit::{Circuit, Gate, GateCountReport, GateKind, RegisterLayout};
pub use error::{Error, Result};
pub use lattice::{make_model, LatticeModel, ModelKind};
pub use lbm::{DistributionField, MacroFields, ReynoldsReport};
pub use pauli::{ExpansionReport, PauliTerm};
pub use qsim::{PostSelectResult, StateVector, SuccessCurve};
pub use sparse::SparseMatrix;
