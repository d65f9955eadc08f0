//! Shared fixtures for the criterion benchmarks.

use clb_core::carleman::{build_relaxation, CarlemanSystem};
use clb_core::lattice::{make_model, LatticeModel, ModelKind};
use clb_core::lbm::{kolmogorov_init_perturbed, DistributionField};
use clb_core::oracles::assemble_block_encoding;
use clb_core::Circuit;

pub fn d2q9() -> LatticeModel {
    make_model(ModelKind::D2Q9)
}

pub fn kolmogorov_field(side: usize) -> DistributionField {
    kolmogorov_init_perturbed(&[side, side], 0.1, 1, 1.0, &d2q9()).unwrap()
}

pub fn d2q9_system(dims: &[usize]) -> CarlemanSystem {
    CarlemanSystem::new(&d2q9(), 1.0, dims).unwrap()
}

pub fn d1q3_block_encoding(n: usize) -> (CarlemanSystem, Circuit) {
    let model = make_model(ModelKind::D1Q3);
    let system = build_relaxation(&model, 1.0, &[n]).unwrap();
    let circuit = assemble_block_encoding(&system).unwrap();
    (system, circuit)
}
