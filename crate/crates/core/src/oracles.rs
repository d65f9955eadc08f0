//! Sparse block-encoding oracles for the Carleman relaxation matrix, plus the
//! streaming circuit.
//!
//! The assembled relaxation circuit is H^m; U=; O_v; O_x; H^m. Projecting the
//! a and m registers onto |0> afterwards leaves R_N / (gamma 2^m) on the
//! encoded subspace.
//!
//! Column enumeration. With the m register in uniform superposition, each
//! branch value n names one potential nonzero per column:
//!
//! * n = n1 b + n2 < b^2 shifts v1 by n2 and v2 by n1 (mod b, identity on
//!   padding), enumerating the A block (first order, branches with n1 = 0)
//!   and the A x A block (second order, all n) at once;
//! * n = b^2 + p marks the coupling rows: on columns with x = y (flagged by
//!   the comparator) the set operator rewires (tau, v1, v2) from (1, q, r) to
//!   (0, p, 0), parks q b + r in the m register — the final Hadamard layer
//!   weighs every m value equally, so garbage there is free — and clears y
//!   by XORing x into it;
//! * every remaining (branch, pattern) combination carries no value rotation
//!   and its a qubit stays |1>: the value oracle starts from X on a and
//!   rotates amplitude v / gamma back onto |0> only where an actual matrix
//!   entry exists. Zero entries therefore need no gate at all.
//!
//! The rewiring codes q b + r as m = b + q b + r, clear of the m values that
//! surviving first-order branches end with, so no live path is ever
//! re-matched by a later gate.

use crate::carleman::CarlemanSystem;
use crate::circuit::{
    emit_basis_transposition, emit_comparator, emit_decrement, emit_increment,
    emit_modular_velocity_shift, Circuit, Gate, GateKind, RegisterLayout,
};
use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, ModelKind};

fn check_circuit_model(model: &LatticeModel) -> Result<()> {
    if model.kind() == ModelKind::D3Q27 {
        return Err(Error::Unsupported(
            "circuit synthesis covers D1Q3 and D2Q9; D3Q27 has analytic success-rate \
             estimates only"
                .into(),
        ));
    }
    Ok(())
}

fn register_controls(layout: &RegisterLayout, name: &str, value: usize) -> Vec<(usize, u8)> {
    let r = layout.register(name);
    (0..r.width)
        .map(|i| (r.start + i, ((value >> (r.width - 1 - i)) & 1) as u8))
        .collect()
}

/// Rotation that takes a = |1> to (v/gamma)|0> + sqrt(1 - (v/gamma)^2)|1>.
fn value_angle(v: f64, gamma: f64) -> f64 {
    -2.0 * (v / gamma).asin()
}

/// Garbage code parked in the m register by the set operator.
fn coupling_code(b: usize, q: usize, r: usize) -> usize {
    b + q * b + r
}

fn new_clb_circuit(system: &CarlemanSystem, name: &str) -> Result<Circuit> {
    let layout = RegisterLayout::clb(system.model(), system.dims(), true)?;
    let mut circ = Circuit::new(layout, name);
    circ.meta.model = Some(system.model().kind());
    circ.meta.omega = Some(system.omega());
    circ.meta.n_sites = system.n_sites();
    Ok(circ)
}

/// Value oracle O_v: multi-controlled RY rotations on the a register, one per
/// distinct (m branch, tau, velocity pattern) carrying a matrix entry. The
/// leading X dooms every unmatched branch, so only true entries reach the
/// projected block. Controls touch m, tau, v1, v2 and eq only, never the
/// position registers, so the gate count is independent of N.
pub fn value_oracle(system: &CarlemanSystem) -> Result<Circuit> {
    check_circuit_model(system.model())?;
    let mut circ = new_clb_circuit(system, "value-oracle")?;
    let layout = circ.layout.clone();
    let b = system.model().velocity_count();
    let gamma = system.gamma();
    let a_mat = system.collision_a();
    let b_mat = system.collision_b();
    let a_qubit = layout.qubits("a").start;
    let eq_qubit = layout.qubits("eq").start;

    if gamma <= 0.0 {
        return Err(Error::invalid("gamma must be positive"));
    }
    for p in 0..b {
        for &(_, v) in a_mat.row(p).iter().chain(b_mat.row(p)) {
            if v.abs() > gamma + 1e-12 {
                return Err(Error::invalid(format!(
                    "entry {v} exceeds the normalization gamma = {gamma}"
                )));
            }
        }
    }

    circ.x(a_qubit);

    // A block: branch n < b rotates the value A[(q+n) mod b, q] for first-order
    // columns (tau = 0, v1 = q).
    for n in 0..b {
        for q in 0..b {
            let v = a_mat.get((q + n) % b, q);
            if v != 0.0 {
                let mut ctrls = register_controls(&layout, "m", n);
                ctrls.extend(register_controls(&layout, "tau", 0));
                ctrls.extend(register_controls(&layout, "v1", q));
                circ.mcry(&ctrls, value_angle(v, gamma), a_qubit);
            }
        }
    }

    // A x A block: branch n = n1 b + n2 rotates A[(q+n2)%b, q] A[(r+n1)%b, r]
    // for second-order columns (tau = 1, v1 = q, v2 = r).
    for n in 0..b * b {
        let (n1, n2) = (n / b, n % b);
        for q in 0..b {
            let va = a_mat.get((q + n2) % b, q);
            if va == 0.0 {
                continue;
            }
            for r in 0..b {
                let vb = a_mat.get((r + n1) % b, r);
                let v = va * vb;
                if v != 0.0 {
                    let mut ctrls = register_controls(&layout, "m", n);
                    ctrls.extend(register_controls(&layout, "tau", 1));
                    ctrls.extend(register_controls(&layout, "v1", q));
                    ctrls.extend(register_controls(&layout, "v2", r));
                    circ.mcry(&ctrls, value_angle(v, gamma), a_qubit);
                }
            }
        }
    }

    // Coupling block: branch b^2 + p rotates B[p, (q, r)] on diagonal-pair
    // columns only (eq = 1).
    for p in 0..b {
        for &(qr, v) in b_mat.row(p) {
            let (q, r) = (qr / b, qr % b);
            let mut ctrls = register_controls(&layout, "m", b * b + p);
            ctrls.extend(register_controls(&layout, "tau", 1));
            ctrls.extend(register_controls(&layout, "v1", q));
            ctrls.extend(register_controls(&layout, "v2", r));
            ctrls.push((eq_qubit, 1));
            circ.mcry(&ctrls, value_angle(v, gamma), a_qubit);
        }
    }
    Ok(circ)
}

/// Gates of the comparator marking eq on the x/y registers of `layout`.
fn comparator_gates(layout: &RegisterLayout) -> Vec<Gate> {
    let x: Vec<usize> = layout.qubits("x").collect();
    let y: Vec<usize> = layout.qubits("y").collect();
    let eq = layout.qubits("eq").start;
    let mut gates = Vec::new();
    emit_comparator(&mut gates, &x, &y, eq);
    gates
}

/// Position-oracle body: the branch shifts, the set operator and the
/// comparator uncomputation. Assumes eq was already marked.
fn position_body(system: &CarlemanSystem, layout: &RegisterLayout) -> Vec<Gate> {
    let b = system.model().velocity_count();
    let b_mat = system.collision_b();
    let v1: Vec<usize> = layout.qubits("v1").collect();
    let v2: Vec<usize> = layout.qubits("v2").collect();
    let x: Vec<usize> = layout.qubits("x").collect();
    let y: Vec<usize> = layout.qubits("y").collect();
    let eq = layout.qubits("eq").start;
    let tau = layout.qubits("tau").start;
    let mut gates = Vec::new();

    // Shift branches n = n1 b + n2: v1 += n2, v2 += n1 (mod b). The same
    // shifts serve both tau sectors; first-order columns (v2 = 0) leave the
    // encoded pattern whenever n1 != 0, which is exactly when no rotation
    // was applied.
    for n in 0..b * b {
        let (n1, n2) = (n / b, n % b);
        let ctrls = register_controls(layout, "m", n);
        emit_modular_velocity_shift(&mut gates, &v1, b, n2, &ctrls);
        emit_modular_velocity_shift(&mut gates, &v2, b, n1, &ctrls);
    }

    // Coupling branches b^2 + p, on comparator-flagged columns: clear y by
    // XORing x into it (y held a copy of x), ...
    for p in 0..b {
        let mut ctrls = register_controls(layout, "m", b * b + p);
        ctrls.push((tau, 1));
        ctrls.push((eq, 1));
        for (&xj, &yj) in x.iter().zip(&y) {
            let mut c = ctrls.clone();
            c.push((xj, 1));
            gates.push(Gate {
                kind: GateKind::X,
                targets: vec![yj],
                controls: c,
            });
        }
    }
    // ... then rewire (m, tau, v1, v2, eq): (b^2+p, 1, q, r, 1) <-> (code, 0, p, 0, 0),
    // one basis transposition per nonzero B entry.
    let m_reg: Vec<usize> = layout.qubits("m").collect();
    let mut composite = Vec::new();
    composite.extend_from_slice(&m_reg);
    composite.push(tau);
    composite.extend_from_slice(&v1);
    composite.extend_from_slice(&v2);
    composite.push(eq);
    let w = v1.len();
    let pack = |m_val: usize, tau_val: usize, v1_val: usize, v2_val: usize, eq_val: usize| {
        ((((m_val << 1 | tau_val) << w | v1_val) << w | v2_val) << 1) | eq_val
    };
    for p in 0..b {
        for &(qr, _v) in b_mat.row(p) {
            let (q, r) = (qr / b, qr % b);
            let left = pack(b * b + p, 1, q, r, 1);
            let right = pack(coupling_code(b, q, r), 0, p, 0, 0);
            emit_basis_transposition(&mut gates, &composite, left, right, &[]);
        }
    }

    // Uncompute eq; positions are untouched for every surviving path except
    // the rewired coupling paths, whose y is now 0.
    gates.extend(comparator_gates(layout));

    // The x = 0 coupling paths were re-flagged by the uncompute (x == y == 0);
    // clear them. Controls pin the rewired pattern, v1 stays free.
    let mut seen_pairs = std::collections::BTreeSet::new();
    for p in 0..b {
        for &(qr, _) in b_mat.row(p) {
            seen_pairs.insert(qr);
        }
    }
    for qr in seen_pairs {
        let (q, r) = (qr / b, qr % b);
        let mut ctrls = register_controls(layout, "m", coupling_code(b, q, r));
        ctrls.extend(register_controls(layout, "tau", 0));
        ctrls.extend(register_controls(layout, "v2", 0));
        ctrls.extend(x.iter().map(|&q| (q, 0)));
        ctrls.extend(y.iter().map(|&q| (q, 0)));
        gates.push(Gate {
            kind: GateKind::X,
            targets: vec![eq],
            controls: ctrls,
        });
    }
    gates
}

/// Position oracle O_x: a pure permutation on (m, tau, v1, v2, x, y, eq),
/// preceded by the comparator marking eq. Conditioned on the m branch it
/// applies the velocity shifts for the diagonal blocks (both tau sectors) and,
/// on the coupling branches with eq = 1, the set operator on (tau, v1, v2).
pub fn position_oracle(system: &CarlemanSystem) -> Result<Circuit> {
    check_circuit_model(system.model())?;
    let mut circ = new_clb_circuit(system, "position-oracle")?;
    let layout = circ.layout.clone();
    let mut gates = comparator_gates(&layout);
    gates.extend(position_body(system, &layout));
    circ.gates = gates;
    Ok(circ)
}

/// Full relaxation block-encoding: H^m, comparator, O_v, O_x body, H^m.
/// The comparator (the head of the position oracle) is hoisted before the
/// value oracle so that the coupling rotations can condition on eq; the H,
/// O_v, O_x, H order of the layers is otherwise preserved.
pub fn assemble_block_encoding(system: &CarlemanSystem) -> Result<Circuit> {
    check_circuit_model(system.model())?;
    let value = value_oracle(system)?;
    let mut circ = new_clb_circuit(system, "relaxation-block-encoding")?;
    let layout = circ.layout.clone();
    let mut gates: Vec<Gate> = Vec::new();
    for q in layout.qubits("m") {
        gates.push(Gate {
            kind: GateKind::H,
            targets: vec![q],
            controls: Vec::new(),
        });
    }
    gates.extend(comparator_gates(&layout));
    gates.extend(value.gates.iter().cloned());
    gates.extend(position_body(system, &layout));
    for q in layout.qubits("m") {
        gates.push(Gate {
            kind: GateKind::H,
            targets: vec![q],
            controls: Vec::new(),
        });
    }
    circ.gates = gates;
    Ok(circ)
}

/// Streaming circuit: controlled on v1 = p it shifts each x axis by the
/// corresponding component of c_p (modular increment or decrement); controlled
/// on tau = 1 and v2 = q it shifts y by c_q. Rest components emit nothing, so
/// first-order states (v2 = 0) never move their y register.
///
/// Requires power-of-two axes: a padded axis would wrap at the register size
/// instead of the grid size.
pub fn streaming_circuit(model: &LatticeModel, dims: &[usize]) -> Result<Circuit> {
    check_circuit_model(model)?;
    if dims.iter().any(|d| !d.is_power_of_two()) {
        return Err(Error::invalid(format!(
            "streaming needs power-of-two axes, got {dims:?}"
        )));
    }
    let layout = RegisterLayout::clb(model, dims, false)?;
    let mut circ = Circuit::new(layout, "streaming");
    circ.meta.model = Some(model.kind());
    circ.meta.n_sites = dims.iter().product();
    let layout = circ.layout.clone();
    let b = model.velocity_count();
    let axis_widths = layout.axis_widths().to_vec();

    let axis_qubits = |reg: &str, axis: usize| -> Vec<usize> {
        let base = layout.register(reg).start;
        let offset: usize = axis_widths[..axis].iter().sum();
        (0..axis_widths[axis]).map(|i| base + offset + i).collect()
    };

    let mut gates = Vec::new();
    for p in 0..b {
        let ctrls = register_controls(&layout, "v1", p);
        for (axis, &c) in model.velocity(p).iter().enumerate() {
            let reg = axis_qubits("x", axis);
            match c {
                1 => emit_increment(&mut gates, &reg, &ctrls),
                -1 => emit_decrement(&mut gates, &reg, &ctrls),
                _ => {}
            }
        }
    }
    let tau = layout.qubits("tau").start;
    for q in 0..b {
        let mut ctrls = register_controls(&layout, "v2", q);
        ctrls.push((tau, 1));
        for (axis, &c) in model.velocity(q).iter().enumerate() {
            let reg = axis_qubits("y", axis);
            match c {
                1 => emit_increment(&mut gates, &reg, &ctrls),
                -1 => emit_decrement(&mut gates, &reg, &ctrls),
                _ => {}
            }
        }
    }
    circ.gates = gates;
    Ok(circ)
}

/// Follows a basis state through a permutation circuit (X gates only).
/// Errors when the circuit contains amplitude-mixing gates.
pub fn permute_basis_index(circuit: &Circuit, index: usize) -> Result<usize> {
    let n = circuit.n_qubits();
    let bit = |q: usize| n - 1 - q;
    let mut idx = index;
    for gate in &circuit.gates {
        match gate.kind {
            GateKind::X => {
                let matched = gate
                    .controls
                    .iter()
                    .all(|&(q, v)| ((idx >> bit(q)) & 1) as u8 == v);
                if matched {
                    idx ^= 1 << bit(gate.targets[0]);
                }
            }
            GateKind::Swap => {
                let matched = gate
                    .controls
                    .iter()
                    .all(|&(q, v)| ((idx >> bit(q)) & 1) as u8 == v);
                if matched {
                    let b1 = (idx >> bit(gate.targets[0])) & 1;
                    let b2 = (idx >> bit(gate.targets[1])) & 1;
                    if b1 != b2 {
                        idx ^= (1 << bit(gate.targets[0])) | (1 << bit(gate.targets[1]));
                    }
                }
            }
            _ => {
                return Err(Error::invalid(
                    "circuit mixes amplitudes; not a basis permutation",
                ))
            }
        }
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::{build_relaxation, build_streaming, CarlemanSystem};
    use crate::lattice::{make_model, ModelKind};
    use crate::qsim::{encoded_indices, extract_block, first_order_index, m_ancillas, second_order_index};
    use approx::assert_abs_diff_eq;

    #[test]
    fn d3q27_rejected() {
        let m = make_model(ModelKind::D3Q27);
        let system = CarlemanSystem::new(&m, 1.0, &[1, 1, 1]).unwrap();
        assert!(matches!(
            value_oracle(&system),
            Err(Error::Unsupported(_))
        ));
        assert!(streaming_circuit(&m, &[2, 2, 2]).is_err());
    }

    #[test]
    fn value_oracle_gate_count_independent_of_n() {
        let m = make_model(ModelKind::D1Q3);
        let counts: Vec<usize> = [2usize, 4, 8]
            .iter()
            .map(|&n| {
                let system = CarlemanSystem::new(&m, 0.9, &[n]).unwrap();
                value_oracle(&system).unwrap().gates.len()
            })
            .collect();
        assert_eq!(counts[0], counts[1]);
        assert_eq!(counts[1], counts[2]);
    }

    #[test]
    fn position_oracle_is_a_bijection_on_basis_states() {
        let m = make_model(ModelKind::D1Q3);
        let system = CarlemanSystem::new(&m, 1.0, &[2]).unwrap();
        let circ = position_oracle(&system).unwrap();
        let dim = 1usize << circ.n_qubits();
        let mut seen = vec![false; dim];
        for idx in 0..dim {
            let out = permute_basis_index(&circ, idx).unwrap();
            assert!(!seen[out], "collision at output {out}");
            seen[out] = true;
        }
    }

    #[test]
    fn block_contract_d1q3_small() {
        let m = make_model(ModelKind::D1Q3);
        for omega in [0.31, 1.0] {
            let mut system = build_relaxation(&m, omega, &[2]).unwrap();
            crate::carleman::attach_streaming(&mut system).unwrap();
            let circ = assemble_block_encoding(&system).unwrap();
            let block = extract_block(&circ, &circ.layout).unwrap();
            let r = system.relaxation().unwrap();
            let scale = system.gamma() * (1u64 << m_ancillas(3)) as f64;
            for i in 0..r.nrows() {
                for j in 0..r.ncols() {
                    assert_abs_diff_eq!(
                        block[i][j],
                        r.get(i, j) / scale,
                        epsilon = 1e-10
                    );
                }
            }
        }
    }

    #[test]
    fn block_contract_identity_at_omega_zero() {
        let m = make_model(ModelKind::D1Q3);
        let system = build_relaxation(&m, 0.0, &[2]).unwrap();
        assert_abs_diff_eq!(system.gamma(), 1.0);
        let circ = assemble_block_encoding(&system).unwrap();
        let block = extract_block(&circ, &circ.layout).unwrap();
        let scale = 16.0;
        for (i, row) in block.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let expect = if i == j { 1.0 / scale } else { 0.0 };
                assert_abs_diff_eq!(v, expect, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn streaming_circuit_matches_classical_permutation() {
        let m = make_model(ModelKind::D1Q3);
        let circ = streaming_circuit(&m, &[4]).unwrap();
        let s = build_streaming(&m, &[4]).unwrap();
        let sigma = s.as_permutation().unwrap();
        let layout = &circ.layout;
        let indices = encoded_indices(layout);
        // sigma[row] = col means basis state col maps to row
        let b = 3;
        let n = 4;
        for (vec_idx, &basis) in indices.iter().enumerate() {
            let mapped = permute_basis_index(&circ, basis).unwrap();
            // find the Carleman row whose source is vec_idx
            let row = sigma.iter().position(|&c| c == vec_idx).unwrap();
            let expect = if row < b * n {
                first_order_index(layout, row / n, row % n)
            } else {
                let rel = row - b * n;
                let y = rel % n;
                let x = (rel / n) % n;
                let pq = rel / (n * n);
                second_order_index(layout, pq / b, pq % b, x, y)
            };
            assert_eq!(mapped, expect);
        }
    }

    #[test]
    fn streaming_rejects_non_power_of_two() {
        let m = make_model(ModelKind::D1Q3);
        assert!(streaming_circuit(&m, &[3]).is_err());
    }
}
