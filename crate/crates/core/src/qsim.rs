//! Exact statevector simulation of generated circuits, Carleman-state
//! encoding, dense block extraction and post-selection statistics.
//!
//! Basis convention: qubit 0 is the most significant bit of the state index,
//! matching the register order of [`RegisterLayout`], so the index reads as
//! the concatenation (a, m, tau, v1, v2, x, y, eq).

use crate::carleman::{lift, CarlemanState, CarlemanSystem};
use crate::circuit::{Circuit, Gate, GateKind, RegisterLayout};
use crate::error::{Error, Result};
use crate::lattice::LatticeModel;
use crate::lbm::DistributionField;
use num_complex::Complex64;
use std::io::Write;

/// Dense statevectors above this qubit count are refused.
pub const MAX_SIM_QUBITS: usize = 26;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// Complex amplitude vector over n qubits.
#[derive(Debug, Clone)]
pub struct StateVector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    fn check_size(n_qubits: usize) -> Result<()> {
        if n_qubits > MAX_SIM_QUBITS {
            return Err(Error::ResourceCap {
                what: format!("dense statevector over {n_qubits} qubits"),
                needed: n_qubits as u64,
                cap: MAX_SIM_QUBITS as u64,
            });
        }
        Ok(())
    }

    /// |0...0>.
    pub fn zero(n_qubits: usize) -> Result<Self> {
        Self::basis(n_qubits, 0)
    }

    /// Computational basis state |index>.
    pub fn basis(n_qubits: usize, index: usize) -> Result<Self> {
        Self::check_size(n_qubits)?;
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn from_amplitudes(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        Self::check_size(n_qubits)?;
        if amplitudes.len() != 1 << n_qubits {
            return Err(Error::DimensionMismatch(format!(
                "expected {} amplitudes, got {}",
                1usize << n_qubits,
                amplitudes.len()
            )));
        }
        Ok(StateVector {
            n_qubits,
            amplitudes,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes
            .iter()
            .map(|a| a.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn normalize(&mut self) -> Result<f64> {
        let n = self.norm();
        if n == 0.0 {
            return Err(Error::invalid("cannot normalize the zero state"));
        }
        for a in &mut self.amplitudes {
            *a /= n;
        }
        Ok(n)
    }
}

// Visits base | s for every submask s of free_mask (descending), O(1) per step.
#[inline]
fn for_each_submask(base: usize, free_mask: usize, mut f: impl FnMut(usize)) {
    let mut s = free_mask;
    loop {
        f(base | s);
        if s == 0 {
            break;
        }
        s = (s - 1) & free_mask;
    }
}

struct SyncPtr(*mut Complex64);
unsafe impl Send for SyncPtr {}
unsafe impl Sync for SyncPtr {}

impl SyncPtr {
    fn get(&self) -> *mut Complex64 {
        self.0
    }
}

fn apply_gate(amps: &mut [Complex64], n: usize, gate: &Gate) {
    let bit = |q: usize| n - 1 - q;
    let mut cbase = 0usize;
    let mut fixed_mask = 0usize;
    for &(q, v) in &gate.controls {
        let p = bit(q);
        fixed_mask |= 1 << p;
        cbase |= (v as usize) << p;
    }
    let full = (1usize << n) - 1;

    match gate.kind {
        GateKind::Swap => {
            let p1 = bit(gate.targets[0]);
            let p2 = bit(gate.targets[1]);
            let free_mask = full & !fixed_mask & !(1 << p1) & !(1 << p2);
            for_each_submask(cbase, free_mask, |base| {
                amps.swap(base | (1 << p1), base | (1 << p2));
            });
        }
        _ => {
            let pt = bit(gate.targets[0]);
            let free_mask = full & !fixed_mask & !(1 << pt);
            let (m00, m01, m10, m11) = match gate.kind {
                GateKind::H => (FRAC_1_SQRT_2, FRAC_1_SQRT_2, FRAC_1_SQRT_2, -FRAC_1_SQRT_2),
                GateKind::X => (0.0, 1.0, 1.0, 0.0),
                GateKind::Ry(theta) => {
                    let (s, c) = (theta / 2.0).sin_cos();
                    (c, -s, s, c)
                }
                GateKind::Swap => unreachable!(),
            };
            let tmask = 1usize << pt;
            let pair = move |amps: &mut [Complex64], i0: usize| {
                let i1 = i0 | tmask;
                let a0 = amps[i0];
                let a1 = amps[i1];
                amps[i0] = m00 * a0 + m01 * a1;
                amps[i1] = m10 * a0 + m11 * a1;
            };
            let free_count = free_mask.count_ones();
            if free_count >= 18 {
                // split on the highest free bit; the halves touch disjoint pairs
                let split = 1usize << (usize::BITS - 1 - free_mask.leading_zeros());
                let rest = free_mask & !split;
                let ptr = SyncPtr(amps.as_mut_ptr());
                let ptr = &ptr;
                let run = move |prefix: usize| {
                    let slice = unsafe { std::slice::from_raw_parts_mut(ptr.get(), 1 << n) };
                    for_each_submask(cbase | prefix, rest, |i0| pair(slice, i0));
                };
                rayon::join(|| run(0), || run(split));
            } else {
                for_each_submask(cbase, free_mask, |i0| pair(amps, i0));
            }
        }
    }
}

/// Applies the circuit's gates in order, returning the evolved state.
pub fn apply(circuit: &Circuit, state: &StateVector) -> Result<StateVector> {
    if circuit.n_qubits() != state.n_qubits {
        return Err(Error::DimensionMismatch(format!(
            "circuit acts on {} qubits, state has {}",
            circuit.n_qubits(),
            state.n_qubits
        )));
    }
    circuit.validate()?;
    let mut out = state.clone();
    for gate in &circuit.gates {
        apply_gate(&mut out.amplitudes, out.n_qubits, gate);
    }
    Ok(out)
}

/// Probability of a measurement pattern plus the renormalized state on the
/// retained qubits.
#[derive(Debug, Clone)]
pub struct PostSelectResult {
    pub probability: f64,
    pub conditional_state: StateVector,
}

/// Projects onto the given (qubit, bit) outcomes and renormalizes.
pub fn post_select(state: &StateVector, outcomes: &[(usize, u8)]) -> Result<PostSelectResult> {
    let n = state.n_qubits;
    let bit = |q: usize| n - 1 - q;
    let mut fixed_mask = 0usize;
    let mut want = 0usize;
    for &(q, v) in outcomes {
        if q >= n {
            return Err(Error::invalid(format!("qubit {q} out of range")));
        }
        fixed_mask |= 1 << bit(q);
        want |= (v as usize) << bit(q);
    }
    let kept: Vec<usize> = (0..n).rev().filter(|&q| fixed_mask & (1 << bit(q)) == 0).collect();
    // kept runs over qubit indices from the least significant bit upward
    let n_kept = kept.len();
    let mut reduced = vec![Complex64::new(0.0, 0.0); 1 << n_kept];
    let mut probability = 0.0;
    for (idx, &a) in state.amplitudes.iter().enumerate() {
        if idx & fixed_mask == want {
            probability += a.norm_sqr();
            let mut r = 0usize;
            for (j, &q) in kept.iter().enumerate() {
                r |= ((idx >> bit(q)) & 1) << j;
            }
            reduced[r] += a;
        }
    }
    if probability == 0.0 {
        return Err(Error::invalid(
            "post-selection outcome has probability zero",
        ));
    }
    let scale = probability.sqrt();
    for a in &mut reduced {
        *a /= scale;
    }
    Ok(PostSelectResult {
        probability,
        conditional_state: StateVector {
            n_qubits: n_kept,
            amplitudes: reduced,
        },
    })
}

// ---------------------------------------------------------------------------
// Carleman-state encoding
// ---------------------------------------------------------------------------

/// Basis index of the first-order entry (p, x): tau = 0, v1 = p, x set,
/// everything else |0>.
pub fn first_order_index(layout: &RegisterLayout, p: usize, site: usize) -> usize {
    let mut idx = 0usize;
    layout.place(&mut idx, "tau", 0);
    layout.place(&mut idx, "v1", p);
    layout.place(&mut idx, "x", layout.site_register_value(site));
    idx
}

/// Basis index of the second-order entry (p, q, x, y): tau = 1.
pub fn second_order_index(layout: &RegisterLayout, p: usize, q: usize, sx: usize, sy: usize) -> usize {
    let mut idx = 0usize;
    layout.place(&mut idx, "tau", 1);
    layout.place(&mut idx, "v1", p);
    layout.place(&mut idx, "v2", q);
    layout.place(&mut idx, "x", layout.site_register_value(sx));
    layout.place(&mut idx, "y", layout.site_register_value(sy));
    idx
}

/// All encoded basis indices in Carleman vector order (first the bN
/// first-order entries, then the b^2 N^2 pair entries).
pub fn encoded_indices(layout: &RegisterLayout) -> Vec<usize> {
    let b = layout.velocity_count();
    let n = layout.n_sites();
    let mut out = Vec::with_capacity(b * n + b * b * n * n);
    for p in 0..b {
        for x in 0..n {
            out.push(first_order_index(layout, p, x));
        }
    }
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                for y in 0..n {
                    out.push(second_order_index(layout, p, q, x, y));
                }
            }
        }
    }
    out
}

/// Places a Carleman state into register amplitudes, normalized. Returns the
/// statevector and the removed physical norm.
pub fn encode_carleman_state(
    state: &CarlemanState,
    layout: &RegisterLayout,
) -> Result<(StateVector, f64)> {
    let b = layout.velocity_count();
    let n = layout.n_sites();
    if state.first_order.len() != b * n || state.second_order.len() != b * b * n * n {
        return Err(Error::DimensionMismatch(
            "state does not match the register layout".into(),
        ));
    }
    StateVector::check_size(layout.total_qubits())?;
    let mut amps = vec![Complex64::new(0.0, 0.0); 1 << layout.total_qubits()];
    for p in 0..b {
        for x in 0..n {
            amps[first_order_index(layout, p, x)] = state.first_order[p * n + x].into();
        }
    }
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                for y in 0..n {
                    let v = state.second_order[((p * b + q) * n + x) * n + y];
                    amps[second_order_index(layout, p, q, x, y)] = v.into();
                }
            }
        }
    }
    let mut sv = StateVector {
        n_qubits: layout.total_qubits(),
        amplitudes: amps,
    };
    let norm = sv.normalize()?;
    Ok((sv, norm))
}

/// Reads the encoded entries back out, undoing the normalization.
pub fn decode_carleman_state(
    sv: &StateVector,
    layout: &RegisterLayout,
    norm: f64,
) -> Result<CarlemanState> {
    if sv.n_qubits != layout.total_qubits() {
        return Err(Error::DimensionMismatch(
            "state vector does not match the layout".into(),
        ));
    }
    let b = layout.velocity_count();
    let n = layout.n_sites();
    let mut first = vec![0.0; b * n];
    for p in 0..b {
        for x in 0..n {
            first[p * n + x] = sv.amplitudes[first_order_index(layout, p, x)].re * norm;
        }
    }
    let mut second = vec![0.0; b * b * n * n];
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                for y in 0..n {
                    second[((p * b + q) * n + x) * n + y] =
                        sv.amplitudes[second_order_index(layout, p, q, x, y)].re * norm;
                }
            }
        }
    }
    Ok(CarlemanState {
        first_order: first,
        second_order: second,
        truncation_order: 2,
    })
}

// ---------------------------------------------------------------------------
// Block extraction and success probabilities
// ---------------------------------------------------------------------------

/// Applies the circuit to every encoded basis state with the ancillas in |0>
/// and projects onto ancillas |0>, returning the dense block on the encoded
/// subspace (row-major, Carleman ordering).
pub fn extract_block(circuit: &Circuit, layout: &RegisterLayout) -> Result<Vec<Vec<f64>>> {
    StateVector::check_size(circuit.n_qubits())?;
    let indices = encoded_indices(layout);
    let dim = indices.len();
    let mut block = vec![vec![0.0; dim]; dim];
    for (j, &col_index) in indices.iter().enumerate() {
        let input = StateVector::basis(circuit.n_qubits(), col_index)?;
        let output = apply(circuit, &input)?;
        for (i, &row_index) in indices.iter().enumerate() {
            block[i][j] = output.amplitudes[row_index].re;
        }
    }
    Ok(block)
}

/// p_s from direct simulation: probability that the a and m registers all
/// measure |0> after one block-encoding step on the encoded input.
pub fn success_probability_sim(
    circuit: &Circuit,
    input_field: &DistributionField,
    omega: f64,
) -> Result<f64> {
    if let Some(circ_omega) = circuit.meta.omega {
        if (circ_omega - omega).abs() > 1e-12 {
            return Err(Error::invalid(format!(
                "circuit was generated for omega = {circ_omega}, asked to run at {omega}"
            )));
        }
    }
    let layout = &circuit.layout;
    let (encoded, _norm) = encode_carleman_state(&lift(input_field), layout)?;
    let evolved = apply(circuit, &encoded)?;
    let mut outcomes: Vec<(usize, u8)> = vec![(layout.qubits("a").start, 0)];
    outcomes.extend(layout.qubits("m").map(|q| (q, 0)));
    Ok(post_select(&evolved, &outcomes)?.probability)
}

/// p_s evaluated at the matrix level: || (R/gamma) psi ||^2 / 2^(2m) for the
/// normalized encoded input psi. Uses the block structure directly, so the
/// explicit matrix need not be materialized.
pub fn success_probability_analytic(
    system: &CarlemanSystem,
    input_field: &DistributionField,
) -> Result<f64> {
    let state = lift(input_field);
    let b = system.model().velocity_count();
    let n = system.n_sites();
    let a = system.collision_a();
    let bc = system.collision_b();

    let norm2: f64 = state
        .first_order
        .iter()
        .chain(&state.second_order)
        .map(|v| v * v)
        .sum();
    if norm2 == 0.0 {
        return Err(Error::invalid("zero input state"));
    }

    let mut out2 = 0.0;
    // first-order rows: A on the site + B against the same-site pair
    for p in 0..b {
        for x in 0..n {
            let mut acc = 0.0;
            for &(q, v) in a.row(p) {
                acc += v * state.first_order[q * n + x];
            }
            for &(qr, v) in bc.row(p) {
                acc += v * state.second_order[(qr * n + x) * n + x];
            }
            out2 += acc * acc;
        }
    }
    // second-order rows: (A x A) on the velocity pair
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                for y in 0..n {
                    let mut acc = 0.0;
                    for &(r, va) in a.row(p) {
                        for &(s, vb) in a.row(q) {
                            acc += va * vb * state.second_order[((r * b + s) * n + x) * n + y];
                        }
                    }
                    out2 += acc * acc;
                }
            }
        }
    }

    let m = m_ancillas(b);
    let gamma = system.gamma();
    Ok(out2 / norm2 / (gamma * gamma) / 4f64.powi(m as i32))
}

/// Number of sparsity-index ancillas, m = ceil(log2 b^2).
pub fn m_ancillas(b: usize) -> usize {
    let mut m = 0;
    while (1usize << m) < b * b {
        m += 1;
    }
    m
}

/// p_s for a space-uniform input f_p(x) = phi_p, computed in velocity space.
///
/// For uniform data the blocks reduce to a1 = A phi + B (phi x phi) and
/// (A phi) x (A phi), giving
/// p_s = (N ||a1||^2 + N^2 ||A phi||^4) / ((N ||phi||^2 + N^2 ||phi||^4) gamma^2 2^(2m)).
/// This makes site counts like N = 2^10 free, where the explicit vector
/// would have b^2 N^2 entries.
pub fn success_probability_uniform(
    model: &LatticeModel,
    omega: f64,
    n_sites: usize,
    phi: &[f64],
) -> Result<f64> {
    let b = model.velocity_count();
    if phi.len() != b {
        return Err(Error::DimensionMismatch(
            "velocity profile does not match the model".into(),
        ));
    }
    let system = CarlemanSystem::new(model, omega, &vec![1; model.dimension()])?;
    let a = system.collision_a();
    let bc = system.collision_b();
    let n = n_sites as f64;

    let a_phi: Vec<f64> = (0..b)
        .map(|p| a.row(p).iter().map(|&(q, v)| v * phi[q]).sum())
        .collect();
    let b_phiphi: Vec<f64> = (0..b)
        .map(|p| {
            bc.row(p)
                .iter()
                .map(|&(qr, v)| v * phi[qr / b] * phi[qr % b])
                .sum()
        })
        .collect();
    let a1_sq: f64 = a_phi
        .iter()
        .zip(&b_phiphi)
        .map(|(x, y)| (x + y) * (x + y))
        .sum();
    let a_phi_sq: f64 = a_phi.iter().map(|v| v * v).sum();
    let phi_sq: f64 = phi.iter().map(|v| v * v).sum();

    let num = n * a1_sq + n * n * a_phi_sq * a_phi_sq;
    let den = n * phi_sq + n * n * phi_sq * phi_sq;
    let m = m_ancillas(b);
    let gamma = system.gamma();
    Ok(num / den / (gamma * gamma) / 4f64.powi(m as i32))
}

/// Initial velocity profile of a success-probability sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    /// f_p = 1/b at every site.
    Uniform,
    /// f_p = w_p at every site (the no-flow equilibrium).
    Equilibrium,
}

impl InitKind {
    pub fn name(self) -> &'static str {
        match self {
            InitKind::Uniform => "uniform",
            InitKind::Equilibrium => "equilibrium",
        }
    }

    pub fn profile(self, model: &LatticeModel) -> Vec<f64> {
        let b = model.velocity_count();
        match self {
            InitKind::Uniform => vec![1.0 / b as f64; b],
            InitKind::Equilibrium => model.weights().to_vec(),
        }
    }
}

impl std::str::FromStr for InitKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "uniform" => Ok(InitKind::Uniform),
            "equilibrium" => Ok(InitKind::Equilibrium),
            other => Err(Error::invalid(format!(
                "unknown init kind `{other}` (expected uniform or equilibrium)"
            ))),
        }
    }
}

/// Success probability as a function of omega.
#[derive(Debug, Clone)]
pub struct SuccessCurve {
    pub omegas: Vec<f64>,
    pub probabilities: Vec<f64>,
    pub init_kind: InitKind,
    pub n_sites: usize,
}

/// Analytic p_s sweep for a uniform or equilibrium initial profile.
pub fn sweep_omega(
    model: &LatticeModel,
    n_sites: usize,
    init_kind: InitKind,
    omegas: &[f64],
) -> Result<SuccessCurve> {
    if omegas.iter().any(|&w| !(0.0 < w && w <= 2.0)) {
        return Err(Error::invalid("omega grid must lie in (0, 2]"));
    }
    let phi = init_kind.profile(model);
    let probabilities = omegas
        .iter()
        .map(|&w| success_probability_uniform(model, w, n_sites, &phi))
        .collect::<Result<Vec<f64>>>()?;
    Ok(SuccessCurve {
        omegas: omegas.to_vec(),
        probabilities,
        init_kind,
        n_sites,
    })
}

/// Writes `omega,p_s,init_kind,n_sites`.
pub fn write_success_csv<W: Write>(curve: &SuccessCurve, out: &mut W) -> Result<()> {
    writeln!(out, "omega,p_s,init_kind,n_sites")?;
    for (w, p) in curve.omegas.iter().zip(&curve.probabilities) {
        writeln!(
            out,
            "{w},{:.16e},{},{}",
            p,
            curve.init_kind.name(),
            curve.n_sites
        )?;
    }
    Ok(())
}

/// Writes state amplitudes as `index,re,im` (debug aid).
pub fn write_state_csv<W: Write>(state: &StateVector, out: &mut W) -> Result<()> {
    writeln!(out, "index,re,im")?;
    for (i, a) in state.amplitudes.iter().enumerate() {
        writeln!(out, "{i},{:.16e},{:.16e}", a.re, a.im)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{comparator, shift_operator};
    use crate::lattice::{make_model, ModelKind};
    use approx::assert_abs_diff_eq;
    use rand::prelude::*;

    #[test]
    fn hadamard_on_zero() {
        let mut circ = Circuit::new(RegisterLayout::single_register(1), "h");
        circ.h(0);
        let out = apply(&circ, &StateVector::zero(1).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0].re, FRAC_1_SQRT_2, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[1].re, FRAC_1_SQRT_2, epsilon = 1e-15);
    }

    #[test]
    fn empty_circuit_is_identity() {
        let circ = Circuit::new(RegisterLayout::single_register(3), "id");
        let state = StateVector::basis(3, 5).unwrap();
        let out = apply(&circ, &state).unwrap();
        assert_eq!(out.amplitudes()[5], Complex64::new(1.0, 0.0));
    }

    #[test]
    fn zero_control_semantics_match_x_conjugation() {
        // direct 0-controls versus X-sandwich lowering, all four basis states
        let mut circ = Circuit::new(RegisterLayout::single_register(2), "c");
        circ.mcx(&[(0, 0)], 1);
        let lowered = circ.lower_zero_controls();
        for basis in 0..4 {
            let input = StateVector::basis(2, basis).unwrap();
            let a = apply(&circ, &input).unwrap();
            let b = apply(&lowered, &input).unwrap();
            for i in 0..4 {
                assert_abs_diff_eq!(a.amplitudes()[i].re, b.amplitudes()[i].re, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn swap_gate() {
        let mut circ = Circuit::new(RegisterLayout::single_register(2), "s");
        circ.swap(0, 1);
        let out = apply(&circ, &StateVector::basis(2, 0b01).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0b10].re, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ry_rotation_angles() {
        let mut circ = Circuit::new(RegisterLayout::single_register(1), "r");
        let v: f64 = 0.6;
        circ.x(0);
        circ.mcry(&[], -2.0 * v.asin(), 0);
        let out = apply(&circ, &StateVector::zero(1).unwrap()).unwrap();
        assert_abs_diff_eq!(out.amplitudes()[0].re, v, epsilon = 1e-15);
        assert_abs_diff_eq!(out.amplitudes()[1].re, (1.0 - v * v).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn norm_preserved_by_random_circuit() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let n = 10;
        let mut circ = Circuit::new(RegisterLayout::single_register(n), "rand");
        for _ in 0..200 {
            match rng.gen_range(0..3) {
                0 => circ.h(rng.gen_range(0..n)),
                1 => {
                    let t = rng.gen_range(0..n);
                    let c = (t + 1 + rng.gen_range(0..n - 1)) % n;
                    circ.mcx(&[(c, rng.gen_range(0..2) as u8)], t);
                }
                _ => circ.mcry(&[], rng.gen_range(-3.0..3.0), rng.gen_range(0..n)),
            }
        }
        let mut amps: Vec<Complex64> = (0..1 << n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        let state = StateVector::from_amplitudes(n, amps).unwrap();
        let out = apply(&circ, &state).unwrap();
        assert_abs_diff_eq!(out.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn comparator_truth_table() {
        let circ = comparator(3);
        for x in 0..8usize {
            for y in 0..8usize {
                let mut idx = 0usize;
                circ.layout.place(&mut idx, "x", x);
                circ.layout.place(&mut idx, "y", y);
                let out = apply(&circ, &StateVector::basis(circ.n_qubits(), idx).unwrap()).unwrap();
                let hot: Vec<usize> = (0..out.amplitudes().len())
                    .filter(|&i| out.amplitudes()[i].norm() > 0.5)
                    .collect();
                assert_eq!(hot.len(), 1);
                let eq_bit = circ.layout.read(hot[0], "eq");
                assert_eq!(eq_bit == 1, x == y, "x={x} y={y}");
                assert_eq!(circ.layout.read(hot[0], "x"), x);
                assert_eq!(circ.layout.read(hot[0], "y"), y);
                // involution
                let back = apply(&circ, &out).unwrap();
                assert!(back.amplitudes()[idx].norm() > 0.999);
            }
        }
    }

    #[test]
    fn shift_truth_table() {
        let circ = shift_operator(3, 5).unwrap();
        for k in 0..8usize {
            let out = apply(&circ, &StateVector::basis(3, k).unwrap()).unwrap();
            let expect = (k + 5) % 8;
            assert!(out.amplitudes()[expect].norm() > 0.999, "k={k}");
        }
        // eight applications of +1 come back around
        let inc = shift_operator(3, 1).unwrap();
        let mut state = StateVector::basis(3, 6).unwrap();
        for _ in 0..8 {
            state = apply(&inc, &state).unwrap();
        }
        assert!(state.amplitudes()[6].norm() > 0.999);
    }

    #[test]
    fn post_select_consistency() {
        let mut circ = Circuit::new(RegisterLayout::single_register(3), "c");
        circ.h(0);
        circ.h(1);
        circ.mcx(&[(0, 1)], 2);
        let out = apply(&circ, &StateVector::zero(3).unwrap()).unwrap();
        let sel = post_select(&out, &[(2, 0)]).unwrap();
        assert_abs_diff_eq!(sel.probability, 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(sel.conditional_state.norm(), 1.0, epsilon = 1e-14);
        // manual sum of projected squares
        let manual: f64 = out
            .amplitudes()
            .iter()
            .enumerate()
            .filter(|(i, _)| i & 0b001 == 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        assert_abs_diff_eq!(sel.probability, manual, epsilon = 1e-14);
    }

    #[test]
    fn encode_decode_round_trip() {
        let model = make_model(ModelKind::D1Q3);
        let layout = RegisterLayout::clb(&model, &[4], false).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let values: Vec<f64> = (0..12).map(|_| rng.gen_range(0.05..0.4)).collect();
        let field =
            DistributionField::from_values(model.clone(), vec![4], values).unwrap();
        let state = lift(&field);
        let (sv, norm) = encode_carleman_state(&state, &layout).unwrap();
        assert_abs_diff_eq!(sv.norm(), 1.0, epsilon = 1e-14);
        let back = decode_carleman_state(&sv, &layout, norm).unwrap();
        for (a, b) in state.first_order.iter().zip(&back.first_order) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
        for (a, b) in state.second_order.iter().zip(&back.second_order) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-14);
        }
    }

    #[test]
    fn identity_circuit_extracts_identity_block() {
        let model = make_model(ModelKind::D1Q3);
        let layout = RegisterLayout::clb(&model, &[2], false).unwrap();
        let circ = Circuit::new(layout.clone(), "id");
        let block = extract_block(&circ, &layout).unwrap();
        for (i, row) in block.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                assert_abs_diff_eq!(v, if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn success_rate_at_omega_zero_is_inverse_4m() {
        // R = identity and gamma = 1: p_s = 1 / 2^(2m) for any encoded input.
        let model = make_model(ModelKind::D1Q3);
        let dims = [2usize];
        let field = DistributionField::from_values(
            model.clone(),
            dims.to_vec(),
            vec![0.3, 0.1, 0.2, 0.25, 0.05, 0.15],
        )
        .unwrap();
        let system = crate::carleman::CarlemanSystem::new(&model, 0.0, &dims).unwrap();
        let circuit = crate::oracles::assemble_block_encoding(&system).unwrap();
        let sim = success_probability_sim(&circuit, &field, 0.0).unwrap();
        let expect = 1.0 / 4f64.powi(m_ancillas(3) as i32);
        assert_abs_diff_eq!(sim, expect, epsilon = 1e-12);
        let analytic = success_probability_analytic(&system, &field).unwrap();
        assert_abs_diff_eq!(analytic, expect, epsilon = 1e-12);
    }

    #[test]
    fn equilibrium_success_rate_is_dominant_scale() {
        // f = w is a collision fixed point, so p_s = 1 / (gamma^2 2^(2m));
        // for D1Q3 at omega = 1, gamma = 1 and p_s = 1/256 (about 4e-3).
        let model = make_model(ModelKind::D1Q3);
        let p = success_probability_uniform(&model, 1.0, 8, model.weights()).unwrap();
        assert_abs_diff_eq!(p, 1.0 / 256.0, epsilon = 1e-15);
    }

    #[test]
    fn single_point_sweep() {
        let model = make_model(ModelKind::D2Q9);
        let curve = sweep_omega(&model, 4, InitKind::Uniform, &[1.0]).unwrap();
        assert_eq!(curve.probabilities.len(), 1);
        assert!(curve.probabilities[0] > 0.0 && curve.probabilities[0] < 1.0);
        assert!(sweep_omega(&model, 4, InitKind::Uniform, &[2.5]).is_err());
    }

    #[test]
    fn encode_rejects_zero_state() {
        let model = make_model(ModelKind::D1Q3);
        let layout = RegisterLayout::clb(&model, &[2], false).unwrap();
        let zero = CarlemanState {
            first_order: vec![0.0; 6],
            second_order: vec![0.0; 36],
            truncation_order: 2,
        };
        assert!(encode_carleman_state(&zero, &layout).is_err());
    }

    #[test]
    fn single_population_encodes_one_amplitude() {
        let model = make_model(ModelKind::D1Q3);
        let layout = RegisterLayout::clb(&model, &[2], false).unwrap();
        let mut state = CarlemanState {
            first_order: vec![0.0; 6],
            second_order: vec![0.0; 36],
            truncation_order: 2,
        };
        state.first_order[1 * 2 + 1] = 1.0; // p = 1, x = 1
        let (sv, norm) = encode_carleman_state(&state, &layout).unwrap();
        assert_abs_diff_eq!(norm, 1.0, epsilon = 1e-15);
        let nonzero: Vec<usize> = (0..sv.amplitudes().len())
            .filter(|&i| sv.amplitudes()[i].norm() > 0.0)
            .collect();
        assert_eq!(nonzero, vec![first_order_index(&layout, 1, 1)]);
    }
}
