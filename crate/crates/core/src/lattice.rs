//! DdQb lattice models: discrete velocity sets, weights and sound speed.
//!
//! Every supported model is the d-fold tensor product of the one-dimensional
//! three-velocity set (0, +1, -1) with weights (2/3, 1/6, 1/6), so b = 3^d and
//! c_s^2 = 1/3 in lattice units.
//!
//! Velocity ordering convention (fixed; every matrix layout in the crate
//! inherits it): index 0 is the rest velocity, then all axis-aligned
//! velocities, then planar diagonals, then (for D3Q27) the cube corners.
//! Within each group the order is the stable tensor-product enumeration,
//! axis 0 slowest, with per-axis component order (0, +1, -1).

use crate::error::{Error, Result};
use std::fmt;
use std::str::FromStr;

/// Square of the lattice sound speed, c_s^2 = 1/3.
pub const CS2: f64 = 1.0 / 3.0;

/// Identifier of a supported velocity set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    D1Q3,
    D2Q9,
    D3Q27,
}

impl ModelKind {
    pub fn dimension(self) -> usize {
        match self {
            ModelKind::D1Q3 => 1,
            ModelKind::D2Q9 => 2,
            ModelKind::D3Q27 => 3,
        }
    }

    pub fn velocity_count(self) -> usize {
        3usize.pow(self.dimension() as u32)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::D1Q3 => "D1Q3",
            ModelKind::D2Q9 => "D2Q9",
            ModelKind::D3Q27 => "D3Q27",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "D1Q3" => Ok(ModelKind::D1Q3),
            "D2Q9" => Ok(ModelKind::D2Q9),
            "D3Q27" => Ok(ModelKind::D3Q27),
            other => Err(Error::invalid(format!(
                "unknown lattice model `{other}` (expected D1Q3, D2Q9 or D3Q27)"
            ))),
        }
    }
}

/// A discrete velocity set with its weights.
#[derive(Debug, Clone, PartialEq)]
pub struct LatticeModel {
    kind: ModelKind,
    dimension: usize,
    velocity_count: usize,
    /// Flat velocity table, `velocity_count * dimension` entries, site units per timestep.
    velocities: Vec<i32>,
    weights: Vec<f64>,
}

/// Builds one of the supported DdQb models.
pub fn make_model(kind: ModelKind) -> LatticeModel {
    let d = kind.dimension();
    let b = kind.velocity_count();
    // 1D component order (0, +1, -1) with weights (2/3, 1/6, 1/6).
    const C1: [i32; 3] = [0, 1, -1];
    const W1: [f64; 3] = [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0];

    let mut entries: Vec<(Vec<i32>, f64)> = Vec::with_capacity(b);
    for idx in 0..b {
        let mut rem = idx;
        let mut c = vec![0i32; d];
        let mut w = 1.0;
        // axis 0 slowest
        for axis in (0..d).rev() {
            let component = rem % 3;
            rem /= 3;
            c[axis] = C1[component];
            w *= W1[component];
        }
        entries.push((c, w));
    }
    entries.sort_by_key(|(c, _)| c.iter().map(|x| x.abs()).sum::<i32>());

    let mut velocities = Vec::with_capacity(b * d);
    let mut weights = Vec::with_capacity(b);
    for (c, w) in entries {
        velocities.extend_from_slice(&c);
        weights.push(w);
    }
    LatticeModel {
        kind,
        dimension: d,
        velocity_count: b,
        velocities,
        weights,
    }
}

impl LatticeModel {
    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    /// Spatial dimension d.
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    /// Number of discrete velocities b = 3^d.
    pub fn velocity_count(&self) -> usize {
        self.velocity_count
    }

    /// Velocity vector of population `p`.
    pub fn velocity(&self, p: usize) -> &[i32] {
        &self.velocities[p * self.dimension..(p + 1) * self.dimension]
    }

    /// Quadrature weight of population `p`.
    pub fn weight(&self, p: usize) -> f64 {
        self.weights[p]
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Squared sound speed (1/3 for all supported models).
    pub fn sound_speed_sq(&self) -> f64 {
        CS2
    }

    /// Dot product of two discrete velocities.
    pub fn cc(&self, p: usize, q: usize) -> f64 {
        let cp = self.velocity(p);
        let cq = self.velocity(q);
        cp.iter().zip(cq).map(|(a, b)| (a * b) as f64).sum()
    }

    /// Dot product of velocity `p` with a real vector.
    pub fn cu(&self, p: usize, u: &[f64]) -> f64 {
        self.velocity(p)
            .iter()
            .zip(u)
            .map(|(c, u)| *c as f64 * u)
            .sum()
    }
}
