//! Second-order Carleman linearization of the lattice Boltzmann update.
//!
//! The collision at one site is an exact quadratic polynomial in the
//! populations, f'_p = A_pq f_q + B_{p,(q,r)} f_q f_r, so promoting the
//! products f_{pq}(x, y) = f_p(x) f_q(y) to independent variables and cutting
//! the ladder at order 2 yields the linear relaxation map
//!
//!   R = [ A per site | B on same-site pairs ]
//!       [ 0          | (A x A) per site pair ]
//!
//! followed by the streaming permutation S on both blocks. Index layout
//! (fixed; the circuit registers mirror it): first-order entry p*N + x,
//! second-order entry bN + ((p*b + q)*N + x)*N + y, sites row-major.

use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, CS2};
use crate::lbm::{lbm_step, macro_fields, DistributionField};
use crate::sparse::SparseMatrix;
use std::io::Write;

/// Refuse to materialize relaxation matrices with more nonzeros than this.
pub const DEFAULT_ELEMENT_CAP: usize = 1 << 25;

/// Carleman collision matrices.
///
/// A_pq = (1 - omega) delta_pq + omega w_p (1 + c_p.c_q / c_s^2),
/// B_{p,(q,r)} = omega w_p [ (c_p.c_q)(c_p.c_r) / 2c_s^4 - (c_q.c_r) / 2c_s^2 ],
/// with the flat column index q*b + r for B. B is symmetric in (q, r) by
/// construction, so B (f x f) is unambiguous.
pub fn collision_matrices(model: &LatticeModel, omega: f64) -> Result<(SparseMatrix, SparseMatrix)> {
    if !(0.0..=2.0).contains(&omega) {
        return Err(Error::invalid(format!(
            "omega = {omega} outside [0, 2]"
        )));
    }
    let b = model.velocity_count();
    let mut a = SparseMatrix::zeros(b, b);
    let mut bb = SparseMatrix::zeros(b, b * b);
    for p in 0..b {
        let wp = model.weight(p);
        for q in 0..b {
            let delta = if p == q { 1.0 } else { 0.0 };
            a.push(p, q, (1.0 - omega) * delta + omega * wp * (1.0 + model.cc(p, q) / CS2));
        }
        for q in 0..b {
            let cpq = model.cc(p, q);
            for r in 0..b {
                let v = omega
                    * wp
                    * (cpq * model.cc(p, r) / (2.0 * CS2 * CS2) - model.cc(q, r) / (2.0 * CS2));
                bb.push(p, q * b + r, v);
            }
        }
    }
    Ok((a, bb))
}

/// Carleman relaxation and streaming over a periodic grid.
///
/// The explicit matrices are optional: they are only materialized by
/// [`build_relaxation`] / [`build_streaming`], while the normalization scalar
/// gamma and the collision blocks are always available. gamma is the largest
/// absolute entry of R, which equals max(|A|_max, |B|_max, |A|_max^2) because
/// the second-order block holds products of two A entries.
#[derive(Debug, Clone)]
pub struct CarlemanSystem {
    model: LatticeModel,
    omega: f64,
    dims: Vec<usize>,
    a: SparseMatrix,
    b_coupling: SparseMatrix,
    delta: SparseMatrix,
    gamma: f64,
    relaxation: Option<SparseMatrix>,
    streaming: Option<SparseMatrix>,
    step: Option<SparseMatrix>,
}

impl CarlemanSystem {
    /// Builds the system metadata without materializing R or S.
    pub fn new(model: &LatticeModel, omega: f64, dims: &[usize]) -> Result<Self> {
        if dims.len() != model.dimension() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} axes, model {} needs {}",
                dims.len(),
                model.kind(),
                model.dimension()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("grid axes must be positive"));
        }
        let (a, b_coupling) = collision_matrices(model, omega)?;
        let n: usize = dims.iter().product();
        let max_a = a.max_abs();
        let gamma = max_a.max(b_coupling.max_abs()).max(max_a * max_a);
        let mut delta = SparseMatrix::zeros(n, n * n);
        for x in 0..n {
            delta.push(x, (n + 1) * x, 1.0);
        }
        Ok(CarlemanSystem {
            model: model.clone(),
            omega,
            dims: dims.to_vec(),
            a,
            b_coupling,
            delta,
            gamma,
            relaxation: None,
            streaming: None,
            step: None,
        })
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.iter().product()
    }

    /// First-order state length b N.
    pub fn first_order_len(&self) -> usize {
        self.model.velocity_count() * self.n_sites()
    }

    /// Second-order state length b^2 N^2.
    pub fn second_order_len(&self) -> usize {
        let b = self.model.velocity_count();
        let n = self.n_sites();
        b * b * n * n
    }

    pub fn total_len(&self) -> usize {
        self.first_order_len() + self.second_order_len()
    }

    pub fn collision_a(&self) -> &SparseMatrix {
        &self.a
    }

    pub fn collision_b(&self) -> &SparseMatrix {
        &self.b_coupling
    }

    /// Locality selector: N x N^2 with the single entry (x, (N+1) x) = 1,
    /// picking the same-site pair (x, x) out of the pair index x*N + y.
    pub fn delta(&self) -> &SparseMatrix {
        &self.delta
    }

    /// Block-encoding normalization: the largest absolute entry of R.
    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn relaxation(&self) -> Option<&SparseMatrix> {
        self.relaxation.as_ref()
    }

    pub fn streaming(&self) -> Option<&SparseMatrix> {
        self.streaming.as_ref()
    }

    /// Full step matrix C = S R, when both factors were built.
    pub fn step_matrix(&self) -> Option<&SparseMatrix> {
        self.step.as_ref()
    }

    fn refresh_step(&mut self) {
        if let (Some(r), Some(s)) = (&self.relaxation, &self.streaming) {
            // S is a permutation: (S R)[i, :] = R[sigma(i), :].
            let sigma = s.as_permutation().expect("streaming matrix is a permutation");
            let mut c = SparseMatrix::zeros(r.nrows(), r.ncols());
            for (i, &src) in sigma.iter().enumerate() {
                for &(j, v) in r.row(src) {
                    c.push(i, j, v);
                }
            }
            self.step = Some(c);
        }
    }

    /// Site index reached by streaming along velocity p (periodic).
    fn shifted_site(&self, site: usize, p: usize, sign: i64) -> usize {
        let mut rem = site;
        let d = self.dims.len();
        let mut coords = vec![0usize; d];
        for axis in (0..d).rev() {
            coords[axis] = rem % self.dims[axis];
            rem /= self.dims[axis];
        }
        let c = self.model.velocity(p);
        let mut idx = 0;
        for axis in 0..d {
            let dim = self.dims[axis] as i64;
            let shifted = (coords[axis] as i64 + sign * c[axis] as i64).rem_euclid(dim) as usize;
            idx = idx * self.dims[axis] + shifted;
        }
        idx
    }
}

/// Single-site relaxation matrix [[A, B], [0, A x A]], size (b + b^2)^2.
pub fn single_site_relaxation(model: &LatticeModel, omega: f64) -> Result<SparseMatrix> {
    let dims = vec![1usize; model.dimension()];
    let system = build_relaxation(model, omega, &dims)?;
    Ok(system.relaxation.unwrap())
}

/// Builds the explicit relaxation matrix R over the grid.
pub fn build_relaxation(model: &LatticeModel, omega: f64, dims: &[usize]) -> Result<CarlemanSystem> {
    build_relaxation_capped(model, omega, dims, DEFAULT_ELEMENT_CAP)
}

/// [`build_relaxation`] with an explicit nonzero-count cap.
pub fn build_relaxation_capped(
    model: &LatticeModel,
    omega: f64,
    dims: &[usize],
    element_cap: usize,
) -> Result<CarlemanSystem> {
    let mut system = CarlemanSystem::new(model, omega, dims)?;
    let b = model.velocity_count();
    let n = system.n_sites();
    let a = system.a.clone();
    let bc = system.b_coupling.clone();

    let estimate = n * a.nnz() + n * bc.nnz() + n * n * a.nnz() * a.nnz();
    if estimate > element_cap {
        return Err(Error::ResourceCap {
            what: format!("explicit relaxation matrix for {} on {:?}", model.kind(), dims),
            needed: estimate as u64,
            cap: element_cap as u64,
        });
    }

    let first_len = b * n;
    let total = first_len + b * b * n * n;
    let mut r = SparseMatrix::zeros(total, total);

    // First-order rows: A on the same site plus B against same-site pairs.
    for p in 0..b {
        for x in 0..n {
            let row = p * n + x;
            for &(q, v) in a.row(p) {
                r.push(row, q * n + x, v);
            }
            for &(qr, v) in bc.row(p) {
                r.push(row, first_len + (qr * n + x) * n + x, v);
            }
        }
    }
    // Second-order rows: A x A acting on the velocity pair, sites untouched.
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                for y in 0..n {
                    let row = first_len + ((p * b + q) * n + x) * n + y;
                    for &(rr, va) in a.row(p) {
                        for &(ss, vb) in a.row(q) {
                            r.push(row, first_len + ((rr * b + ss) * n + x) * n + y, va * vb);
                        }
                    }
                }
            }
        }
    }
    system.relaxation = Some(r);
    system.refresh_step();
    Ok(system)
}

/// Builds the streaming permutation S: f_p(x) -> f_p(x + c_p) on the first
/// block and f_{pq}(x, y) -> f_{pq}(x + c_p, y + c_q) on the second.
pub fn build_streaming(model: &LatticeModel, dims: &[usize]) -> Result<SparseMatrix> {
    let system = CarlemanSystem::new(model, 0.0, dims)?;
    let b = model.velocity_count();
    let n = system.n_sites();
    let first_len = b * n;
    let total = first_len + b * b * n * n;
    let mut s = SparseMatrix::zeros(total, total);
    // Row (p, x) receives from (p, x - c_p).
    for p in 0..b {
        for x in 0..n {
            let src = system.shifted_site(x, p, -1);
            s.push(p * n + x, p * n + src, 1.0);
        }
    }
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                let sx = system.shifted_site(x, p, -1);
                for y in 0..n {
                    let sy = system.shifted_site(y, q, -1);
                    let row = first_len + ((p * b + q) * n + x) * n + y;
                    s.push(row, first_len + ((p * b + q) * n + sx) * n + sy, 1.0);
                }
            }
        }
    }
    Ok(s)
}

/// Attaches an explicit streaming matrix to a system (for C = S R).
pub fn attach_streaming(system: &mut CarlemanSystem) -> Result<()> {
    let s = build_streaming(&system.model.clone(), &system.dims.clone())?;
    system.streaming = Some(s);
    system.refresh_step();
    Ok(())
}

/// Truncated Carleman state: first-order entries f_p(x) and second-order
/// entries f_{pq}(x, y).
#[derive(Debug, Clone)]
pub struct CarlemanState {
    pub first_order: Vec<f64>,
    pub second_order: Vec<f64>,
    pub truncation_order: usize,
}

/// Lifts a distribution field: second_order = first_order (outer) first_order.
pub fn lift(field: &DistributionField) -> CarlemanState {
    let b = field.model().velocity_count();
    let n = field.n_sites();
    let mut first = vec![0.0; b * n];
    for x in 0..n {
        let f = field.site(x);
        for p in 0..b {
            first[p * n + x] = f[p];
        }
    }
    let mut second = vec![0.0; b * b * n * n];
    for p in 0..b {
        for q in 0..b {
            for x in 0..n {
                let fx = first[p * n + x];
                let base = ((p * b + q) * n + x) * n;
                for y in 0..n {
                    second[base + y] = fx * first[q * n + y];
                }
            }
        }
    }
    CarlemanState {
        first_order: first,
        second_order: second,
        truncation_order: 2,
    }
}

/// Extracts the first-order block back into a distribution field.
pub fn first_order_to_field(
    first: &[f64],
    model: &LatticeModel,
    dims: &[usize],
) -> Result<DistributionField> {
    let b = model.velocity_count();
    let n: usize = dims.iter().product();
    if first.len() != b * n {
        return Err(Error::DimensionMismatch(format!(
            "first-order vector has {} entries, expected {}",
            first.len(),
            b * n
        )));
    }
    let mut values = vec![0.0; b * n];
    for p in 0..b {
        for x in 0..n {
            values[x * b + p] = first[p * n + x];
        }
    }
    DistributionField::from_values(model.clone(), dims.to_vec(), values)
}

/// One explicit Carleman step F <- S (R F).
pub fn carleman_step(state: &CarlemanState, system: &CarlemanSystem) -> Result<CarlemanState> {
    let r = system
        .relaxation
        .as_ref()
        .ok_or_else(|| Error::invalid("system was built without the explicit relaxation matrix"))?;
    let s = system
        .streaming
        .as_ref()
        .ok_or_else(|| Error::invalid("system was built without the explicit streaming matrix"))?;
    if state.first_order.len() != system.first_order_len()
        || state.second_order.len() != system.second_order_len()
    {
        return Err(Error::DimensionMismatch(
            "state does not match the system layout".into(),
        ));
    }
    let mut full = Vec::with_capacity(system.total_len());
    full.extend_from_slice(&state.first_order);
    full.extend_from_slice(&state.second_order);
    let relaxed = r.matvec(&full)?;
    let streamed = s.matvec(&relaxed)?;
    let first_len = system.first_order_len();
    Ok(CarlemanState {
        first_order: streamed[..first_len].to_vec(),
        second_order: streamed[first_len..].to_vec(),
        truncation_order: 2,
    })
}

/// Evolves the first-order Carleman block without materializing the b^2 N^2
/// second-order variables.
///
/// The second-order block of R is (A x A) per site pair, so an initial outer
/// product stays an outer product: it equals h(t) (outer) h(t) where h evolves
/// under the linearized update h <- stream(A h). The first-order update then
/// only needs the same-site products h_q(x) h_r(x). Agrees with the explicit
/// [`carleman_step`] to roundoff.
///
/// Returns T + 1 first-order vectors (including the initial one).
pub fn fast_second_order_path(
    field0: &DistributionField,
    system: &CarlemanSystem,
    steps: usize,
) -> Result<Vec<Vec<f64>>> {
    if field0.dims() != system.dims() || field0.model() != &system.model {
        return Err(Error::DimensionMismatch(
            "field does not match the system grid/model".into(),
        ));
    }
    let b = system.model.velocity_count();
    let n = system.n_sites();
    let a = &system.a;
    let bc = &system.b_coupling;

    // Work in field layout (site-major) for cache locality.
    let mut g = field0.values().to_vec();
    let mut h = g.clone();
    let to_first_order = |vals: &[f64]| {
        let mut first = vec![0.0; b * n];
        for x in 0..n {
            for p in 0..b {
                first[p * n + x] = vals[x * b + p];
            }
        }
        first
    };

    let mut series = Vec::with_capacity(steps + 1);
    series.push(to_first_order(&g));
    let mut g_next = vec![0.0; g.len()];
    let mut h_next = vec![0.0; h.len()];
    for _ in 0..steps {
        for x in 0..n {
            let gs = &g[x * b..(x + 1) * b];
            let hs = &h[x * b..(x + 1) * b];
            for p in 0..b {
                let mut acc = 0.0;
                for &(q, v) in a.row(p) {
                    acc += v * gs[q];
                }
                for &(qr, v) in bc.row(p) {
                    acc += v * hs[qr / b] * hs[qr % b];
                }
                let mut lin = 0.0;
                for &(q, v) in a.row(p) {
                    lin += v * hs[q];
                }
                let dst = system.shifted_site(x, p, 1);
                g_next[dst * b + p] = acc;
                h_next[dst * b + p] = lin;
            }
        }
        std::mem::swap(&mut g, &mut g_next);
        std::mem::swap(&mut h, &mut h_next);
        series.push(to_first_order(&g));
    }
    Ok(series)
}

/// Relative error statistics over the lattice at one timestep.
#[derive(Debug, Clone)]
pub struct ErrorStats {
    pub timestep: usize,
    pub per_site_error: Vec<f64>,
    pub max: f64,
    pub median: f64,
    pub min: f64,
    pub mean: f64,
}

impl ErrorStats {
    fn from_errors(timestep: usize, errors: Vec<f64>) -> Self {
        let mut sorted: Vec<f64> = errors.iter().copied().filter(|e| !e.is_nan()).collect();
        sorted.sort_by(f64::total_cmp);
        let (max, min, median, mean) = if sorted.is_empty() {
            (0.0, 0.0, 0.0, 0.0)
        } else {
            let n = sorted.len();
            let median = if n % 2 == 1 {
                sorted[n / 2]
            } else {
                0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
            };
            let mean = sorted.iter().sum::<f64>() / n as f64;
            (sorted[n - 1], sorted[0], median, mean)
        };
        ErrorStats {
            timestep,
            per_site_error: errors,
            max,
            median,
            min,
            mean,
        }
    }
}

/// Which per-site residual to report.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorMetric {
    /// || f_CLB(x) - f_LBM(x) ||_2 / || f_LBM(x) ||_2 over the b populations.
    Population,
    /// Relative difference of the velocity moments instead.
    Velocity,
}

/// Error time series of the monitor sites picked at the final step.
#[derive(Debug, Clone)]
pub struct MonitorSeries {
    pub max_site: usize,
    pub median_site: usize,
    pub min_site: usize,
    /// Per timestep: (eps at max site, eps at median site, eps at min site).
    pub series: Vec<(f64, f64, f64)>,
}

/// Result of a CLB-versus-LBM comparison run.
#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub steps: Vec<ErrorStats>,
    pub monitors: MonitorSeries,
    /// Sites where the reference vanished at some step (excluded from stats).
    pub excluded_sites: Vec<usize>,
}

/// Evolves the same initial field with the direct LBM and with the truncated
/// Carleman system (fast path) and reports the per-step relative error.
pub fn compare_to_lbm(
    field0: &DistributionField,
    omega: f64,
    steps: usize,
    metric: ErrorMetric,
) -> Result<CompareOutcome> {
    let model = field0.model().clone();
    let system = CarlemanSystem::new(&model, omega, field0.dims())?;
    let clb_series = fast_second_order_path(field0, &system, steps)?;

    let n = field0.n_sites();
    let b = model.velocity_count();
    let d = model.dimension();
    let mut excluded = vec![false; n];
    let mut stats = Vec::with_capacity(steps + 1);
    let mut per_site_history: Vec<Vec<f64>> = Vec::with_capacity(steps + 1);

    let mut lbm_field = field0.clone();
    for t in 0..=steps {
        if t > 0 {
            lbm_field = lbm_step(&lbm_field, omega)?;
        }
        let clb_field = first_order_to_field(&clb_series[t], &model, field0.dims())?;
        let mut errors = vec![0.0; n];
        match metric {
            ErrorMetric::Population => {
                for x in 0..n {
                    let fr = lbm_field.site(x);
                    let fc = clb_field.site(x);
                    let num: f64 = (0..b).map(|p| (fc[p] - fr[p]).powi(2)).sum::<f64>().sqrt();
                    let den: f64 = fr.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if den == 0.0 {
                        excluded[x] = true;
                        errors[x] = f64::NAN;
                    } else {
                        errors[x] = num / den;
                    }
                }
            }
            ErrorMetric::Velocity => {
                let mr = macro_fields(&lbm_field);
                let mc = macro_fields(&clb_field);
                for x in 0..n {
                    let ur = &mr.velocity[x * d..(x + 1) * d];
                    let uc = &mc.velocity[x * d..(x + 1) * d];
                    let num: f64 = ur
                        .iter()
                        .zip(uc)
                        .map(|(a, b)| (a - b).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let den: f64 = ur.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if den == 0.0 {
                        excluded[x] = true;
                        errors[x] = f64::NAN;
                    } else {
                        errors[x] = num / den;
                    }
                }
            }
        }
        per_site_history.push(errors.clone());
        stats.push(ErrorStats::from_errors(t, errors));
    }

    // Monitor sites chosen where the final-step error is max / median / min.
    let last = &per_site_history[steps];
    let mut order: Vec<usize> = (0..n).filter(|&x| !excluded[x]).collect();
    order.sort_by(|&i, &j| last[i].total_cmp(&last[j]));
    let (min_site, median_site, max_site) = if order.is_empty() {
        (0, 0, 0)
    } else {
        (
            order[0],
            order[order.len() / 2],
            order[order.len() - 1],
        )
    };
    let series = per_site_history
        .iter()
        .map(|e| (e[max_site], e[median_site], e[min_site]))
        .collect();

    Ok(CompareOutcome {
        steps: stats,
        monitors: MonitorSeries {
            max_site,
            median_site,
            min_site,
            series,
        },
        excluded_sites: (0..n).filter(|&x| excluded[x]).collect(),
    })
}

/// Writes an error time series as CSV `t,max,median,min,mean`.
pub fn write_error_csv<W: Write>(steps: &[ErrorStats], out: &mut W) -> Result<()> {
    writeln!(out, "t,max,median,min,mean")?;
    for s in steps {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            s.timestep, s.max, s.median, s.min, s.mean
        )?;
    }
    Ok(())
}
