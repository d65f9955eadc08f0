//! Classical lattice Boltzmann update on a periodic grid.
//!
//! Populations are stored site-major, population-minor: `values[site * b + p]`.
//! Sites are linearized row-major over the grid axes (axis 0 slowest).
//!
//! The solver works in the low-Mach normalization: densities are prepared at
//! rho = 1 and the velocity moment is taken as u(x) = sum_p c_p f_p(x) without
//! dividing by the local density. The collision equilibrium is then an exact
//! quadratic polynomial in the populations,
//!
//!   f_p^eq = w_p (rho + u_p + (u_p^2 - |u|^2 / c_s^2) / 2),   u_p = u.c_p / c_s^2,
//!
//! which conserves mass and momentum per site identically and closes the
//! second-order Carleman system built on top of it.

use crate::error::{Error, Result};
use crate::lattice::{LatticeModel, CS2};
use rayon::prelude::*;
use std::io::Write;

/// Populations f_p(x) on a periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionField {
    model: LatticeModel,
    dims: Vec<usize>,
    values: Vec<f64>,
}

impl DistributionField {
    /// Wraps raw population data. `values.len()` must equal `n_sites * b`.
    pub fn from_values(model: LatticeModel, dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dims.len() != model.dimension() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} axes but model {} is {}-dimensional",
                dims.len(),
                model.kind(),
                model.dimension()
            )));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::invalid("grid axes must be positive"));
        }
        let n: usize = dims.iter().product();
        if values.len() != n * model.velocity_count() {
            return Err(Error::DimensionMismatch(format!(
                "expected {} population values, got {}",
                n * model.velocity_count(),
                values.len()
            )));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::invalid("populations must be finite"));
        }
        Ok(DistributionField {
            model,
            dims,
            values,
        })
    }

    pub fn model(&self) -> &LatticeModel {
        &self.model
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn n_sites(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Populations of one site.
    pub fn site(&self, site: usize) -> &[f64] {
        let b = self.model.velocity_count();
        &self.values[site * b..(site + 1) * b]
    }

    /// Row-major site index of the given coordinates (assumed in range).
    pub fn site_index(&self, coords: &[usize]) -> usize {
        let mut idx = 0;
        for (axis, &c) in coords.iter().enumerate() {
            idx = idx * self.dims[axis] + c;
        }
        idx
    }

    /// Coordinates of a row-major site index.
    pub fn site_coords(&self, site: usize) -> Vec<usize> {
        let mut rem = site;
        let mut coords = vec![0usize; self.dims.len()];
        for axis in (0..self.dims.len()).rev() {
            coords[axis] = rem % self.dims[axis];
            rem /= self.dims[axis];
        }
        coords
    }

    /// Site reached from `site` by moving along velocity `p` (periodic wrap).
    pub fn neighbor(&self, site: usize, p: usize) -> usize {
        let c = self.model.velocity(p);
        let mut coords = self.site_coords(site);
        for (axis, &step) in c.iter().enumerate() {
            let d = self.dims[axis] as i64;
            coords[axis] = ((coords[axis] as i64 + step as i64).rem_euclid(d)) as usize;
        }
        self.site_index(&coords)
    }

    /// Total mass sum_{x,p} f_p(x).
    pub fn total_mass(&self) -> f64 {
        self.values.iter().sum()
    }
}

/// Equilibrium populations for a prescribed velocity at unit density.
///
/// Warns (but does not reject) when |u| exceeds 0.3 c_s; the quadratic
/// expansion degrades there.
pub fn equilibrium(u: &[f64], model: &LatticeModel) -> Result<Vec<f64>> {
    if u.len() != model.dimension() {
        return Err(Error::DimensionMismatch(format!(
            "velocity has {} components, model is {}-dimensional",
            u.len(),
            model.dimension()
        )));
    }
    if !u.iter().all(|x| x.is_finite()) {
        return Err(Error::invalid("velocity must be finite"));
    }
    let speed2: f64 = u.iter().map(|x| x * x).sum();
    if speed2.sqrt() > 0.3 * CS2.sqrt() {
        log::warn!(
            "equilibrium evaluated at |u| = {:.4} > 0.3 c_s; low-Mach expansion is inaccurate",
            speed2.sqrt()
        );
    }
    let b = model.velocity_count();
    let mut f = Vec::with_capacity(b);
    for p in 0..b {
        let up = model.cu(p, u) / CS2;
        f.push(model.weight(p) * (1.0 + up + 0.5 * (up * up - speed2 / CS2)));
    }
    Ok(f)
}

fn check_omega_collision(omega: f64) -> Result<()> {
    if !(0.0..2.0).contains(&omega) {
        return Err(Error::invalid(format!(
            "relaxation rate omega = {omega} outside [0, 2)"
        )));
    }
    Ok(())
}

/// Relaxation half-step: f_p <- f_p - omega (f_p - f_p^eq) at every site.
///
/// The equilibrium is the quadratic polynomial form evaluated from the local
/// moments rho = sum_p f_p and u = sum_p c_p f_p.
pub fn collide(field: &DistributionField, omega: f64) -> Result<DistributionField> {
    check_omega_collision(omega)?;
    let model = &field.model;
    let b = model.velocity_count();
    let d = model.dimension();
    let mut values = vec![0.0; field.values.len()];
    values
        .par_chunks_mut(b)
        .zip(field.values.par_chunks(b))
        .for_each(|(out, f)| {
            let rho: f64 = f.iter().sum();
            let mut u = [0.0f64; 3];
            for p in 0..b {
                let c = model.velocity(p);
                for a in 0..d {
                    u[a] += c[a] as f64 * f[p];
                }
            }
            let uu: f64 = u[..d].iter().map(|x| x * x).sum::<f64>() / CS2;
            for p in 0..b {
                let up = model.cu(p, &u[..d]) / CS2;
                let feq = model.weight(p) * (rho + up + 0.5 * (up * up - uu));
                out[p] = f[p] - omega * (f[p] - feq);
            }
        });
    DistributionField::from_values(field.model.clone(), field.dims.clone(), values)
}

/// Periodic streaming: f_p(x + c_p) <- f_p(x).
pub fn stream(field: &DistributionField) -> DistributionField {
    let b = field.model.velocity_count();
    let mut out = vec![0.0; field.values.len()];
    for site in 0..field.n_sites() {
        for p in 0..b {
            let dst = field.neighbor(site, p);
            out[dst * b + p] = field.values[site * b + p];
        }
    }
    DistributionField {
        model: field.model.clone(),
        dims: field.dims.clone(),
        values: out,
    }
}

/// One full lattice Boltzmann update: collision followed by periodic streaming.
pub fn lbm_step(field: &DistributionField, omega: f64) -> Result<DistributionField> {
    Ok(stream(&collide(field, omega)?))
}

/// Initializes a freely decaying Kolmogorov shear flow,
/// u(x, y) = (U sin(2 pi k y / L_y), 0), at unit density.
pub fn kolmogorov_init(
    dims: &[usize],
    speed: f64,
    wavenumber: u32,
    model: &LatticeModel,
) -> Result<DistributionField> {
    kolmogorov_init_perturbed(dims, speed, wavenumber, 0.0, model)
}

/// Kolmogorov shear profile with an optional transverse seed,
/// u = (U sin(2 pi k y / L_y), delta U sin(2 pi k x / L_x)).
///
/// The pure shear (delta = 0) is an exact invariant profile of the quadratic
/// coupling: the second-order closure reproduces it to machine precision, so
/// convergence studies that need a visible truncation error must seed the
/// transverse component.
pub fn kolmogorov_init_perturbed(
    dims: &[usize],
    speed: f64,
    wavenumber: u32,
    delta: f64,
    model: &LatticeModel,
) -> Result<DistributionField> {
    if model.dimension() != 2 {
        return Err(Error::invalid(format!(
            "Kolmogorov initialization requires a 2D model, got {}",
            model.kind()
        )));
    }
    if dims.len() != 2 {
        return Err(Error::DimensionMismatch(
            "Kolmogorov initialization requires a 2-axis grid".into(),
        ));
    }
    if !(0.0..=0.2).contains(&speed) {
        return Err(Error::invalid(format!(
            "peak speed U = {speed} outside [0, 0.2]"
        )));
    }
    let (lx, ly) = (dims[0], dims[1]);
    let b = model.velocity_count();
    let mut values = vec![0.0; lx * ly * b];
    for ix in 0..lx {
        let uy = delta
            * speed
            * (2.0 * std::f64::consts::PI * wavenumber as f64 * ix as f64 / lx as f64).sin();
        for iy in 0..ly {
            let ux = speed
                * (2.0 * std::f64::consts::PI * wavenumber as f64 * iy as f64 / ly as f64).sin();
            let f = equilibrium(&[ux, uy], model)?;
            let site = ix * ly + iy;
            values[site * b..(site + 1) * b].copy_from_slice(&f);
        }
    }
    DistributionField::from_values(model.clone(), dims.to_vec(), values)
}

/// Macroscopic moments per site.
#[derive(Debug, Clone)]
pub struct MacroFields {
    /// rho(x) = sum_p f_p(x).
    pub density: Vec<f64>,
    /// u(x) = sum_p c_p f_p(x), site-major with `dimension` components per site.
    pub velocity: Vec<f64>,
}

pub fn macro_fields(field: &DistributionField) -> MacroFields {
    let b = field.model.velocity_count();
    let d = field.model.dimension();
    let n = field.n_sites();
    let mut density = vec![0.0; n];
    let mut velocity = vec![0.0; n * d];
    for site in 0..n {
        let f = field.site(site);
        density[site] = f.iter().sum();
        for p in 0..b {
            let c = field.model.velocity(p);
            for a in 0..d {
                velocity[site * d + a] += c[a] as f64 * f[p];
            }
        }
    }
    MacroFields { density, velocity }
}

/// Viscosity, Reynolds number and Kolmogorov dissipation scale for a
/// relaxation rate and flow scales.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReynoldsReport {
    pub omega: f64,
    pub viscosity: f64,
    pub macroscale: f64,
    pub speed: f64,
    pub reynolds: f64,
    pub kolmogorov_scale: f64,
}

/// nu = c_s^2 (1/omega - 1/2), Re = U L / nu, L_k = L / Re^(3/4).
pub fn reynolds_report(omega: f64, speed: f64, macroscale: f64) -> Result<ReynoldsReport> {
    if !(omega > 0.0 && omega < 2.0) {
        return Err(Error::invalid(format!(
            "omega = {omega} outside (0, 2): viscosity would not be positive"
        )));
    }
    let viscosity = CS2 * (1.0 / omega - 0.5);
    let reynolds = speed * macroscale / viscosity;
    let kolmogorov_scale = macroscale / reynolds.powf(0.75);
    Ok(ReynoldsReport {
        omega,
        viscosity,
        macroscale,
        speed,
        reynolds,
        kolmogorov_scale,
    })
}

/// Writes a field snapshot as CSV `x,y,p,f` (y = 0 for 1D grids).
pub fn write_snapshot_csv<W: Write>(field: &DistributionField, out: &mut W) -> Result<()> {
    if field.dims.len() > 2 {
        return Err(Error::Unsupported(
            "snapshot CSV export is defined for 1D and 2D grids".into(),
        ));
    }
    writeln!(out, "x,y,p,f")?;
    let b = field.model.velocity_count();
    for site in 0..field.n_sites() {
        let coords = field.site_coords(site);
        let x = coords[0];
        let y = if coords.len() > 1 { coords[1] } else { 0 };
        for p in 0..b {
            writeln!(out, "{x},{y},{p},{:.16e}", field.values[site * b + p])?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_model, ModelKind};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand::Rng as _;

    fn random_field(model: &LatticeModel, dims: &[usize], seed: u64) -> DistributionField {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let n: usize = dims.iter().product();
        let b = model.velocity_count();
        let values: Vec<f64> = (0..n * b)
            .map(|_| model.weights()[rng.gen_range(0..b)] * rng.gen_range(0.5..1.5))
            .collect();
        DistributionField::from_values(model.clone(), dims.to_vec(), values).unwrap()
    }

    #[test]
    fn equilibrium_at_rest_is_weights() {
        let m = make_model(ModelKind::D2Q9);
        let f = equilibrium(&[0.0, 0.0], &m).unwrap();
        for p in 0..9 {
            assert_abs_diff_eq!(f[p], m.weight(p), epsilon = 1e-16);
        }
    }

    #[test]
    fn equilibrium_d1q3_reference_values() {
        // Direct substitution of u = 0.1 into the quadratic equilibrium with
        // weights (2/3, 1/6, 1/6): u_p = u c_p / c_s^2 = (0, 0.3, -0.3) and
        // |u|^2 / c_s^2 = 0.03.
        let m = make_model(ModelKind::D1Q3);
        let f = equilibrium(&[0.1], &m).unwrap();
        assert_abs_diff_eq!(f[0], 2.0 / 3.0 * 0.985, epsilon = 1e-15); // 0.656666...
        assert_abs_diff_eq!(f[1], 1.33 / 6.0, epsilon = 1e-15); // 0.221666...
        assert_abs_diff_eq!(f[2], 0.73 / 6.0, epsilon = 1e-15); // 0.121666...
        let sum: f64 = f.iter().sum();
        assert_abs_diff_eq!(sum, 1.0, epsilon = 1e-15);
        let mom: f64 = (0..3).map(|p| m.velocity(p)[0] as f64 * f[p]).sum();
        assert_abs_diff_eq!(mom, 0.1, epsilon = 1e-15);
    }

    #[test]
    fn equilibrium_rejects_non_finite() {
        let m = make_model(ModelKind::D1Q3);
        assert!(equilibrium(&[f64::NAN], &m).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn equilibrium_sums_to_one(ux in -0.2f64..0.2, uy in -0.2f64..0.2) {
            let m = make_model(ModelKind::D2Q9);
            let f = equilibrium(&[ux, uy], &m).unwrap();
            let sum: f64 = f.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-14);
            // first moment reproduces u exactly (polynomial identity)
            for a in 0..2 {
                let mom: f64 = (0..9).map(|p| m.velocity(p)[a] as f64 * f[p]).sum();
                prop_assert!((mom - [ux, uy][a]).abs() < 1e-14);
            }
        }

        #[test]
        fn mass_conserved_by_step(seed in 0u64..32, omega in 0.01f64..1.99) {
            let m = make_model(ModelKind::D2Q9);
            let field = random_field(&m, &[6, 5], seed);
            let before = field.total_mass();
            let after = lbm_step(&field, omega).unwrap().total_mass();
            prop_assert!(((after - before) / before).abs() < 1e-12);
        }
    }

    #[test]
    fn momentum_invariant_under_collision() {
        let m = make_model(ModelKind::D2Q9);
        let field = random_field(&m, &[4, 4], 7);
        let collided = collide(&field, 1.3).unwrap();
        let before = macro_fields(&field);
        let after = macro_fields(&collided);
        for i in 0..before.velocity.len() {
            assert_abs_diff_eq!(before.velocity[i], after.velocity[i], epsilon = 1e-12);
        }
        for i in 0..before.density.len() {
            assert_abs_diff_eq!(before.density[i], after.density[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn global_equilibrium_is_fixed_point() {
        let m = make_model(ModelKind::D2Q9);
        let b = m.velocity_count();
        let mut values = Vec::new();
        for _ in 0..12 {
            values.extend_from_slice(m.weights());
        }
        let field = DistributionField::from_values(m, vec![4, 3], values).unwrap();
        for omega in [0.31, 1.0, 1.9] {
            let next = lbm_step(&field, omega).unwrap();
            for i in 0..field.values.len() {
                assert_abs_diff_eq!(next.values[i], field.values[i], epsilon = 1e-15);
            }
            let _ = b;
        }
    }

    #[test]
    fn omega_zero_is_pure_streaming() {
        let m = make_model(ModelKind::D1Q3);
        let b = m.velocity_count();
        let mut values = vec![0.0; 6 * b];
        // single-site perturbation
        values[2 * b] = 1.0;
        values[2 * b + 1] = 2.0;
        values[2 * b + 2] = 3.0;
        let field = DistributionField::from_values(m, vec![6], values).unwrap();
        let next = lbm_step(&field, 0.0).unwrap();
        // rest population stays, +1 moves right, -1 moves left
        assert_eq!(next.values[2 * b], 1.0);
        assert_eq!(next.values[3 * b + 1], 2.0);
        assert_eq!(next.values[1 * b + 2], 3.0);
    }

    #[test]
    fn streaming_is_permutation_of_values() {
        let m = make_model(ModelKind::D2Q9);
        let field = random_field(&m, &[5, 3], 3);
        let streamed = stream(&field);
        let mut a: Vec<f64> = field.values.clone();
        let mut b: Vec<f64> = streamed.values.clone();
        a.sort_by(f64::total_cmp);
        b.sort_by(f64::total_cmp);
        assert_eq!(a, b);
    }

    #[test]
    fn omega_out_of_range_rejected() {
        let m = make_model(ModelKind::D1Q3);
        let field = random_field(&m, &[4], 1);
        assert!(lbm_step(&field, 2.0).is_err());
        assert!(lbm_step(&field, -0.1).is_err());
    }

    #[test]
    fn kolmogorov_profile() {
        let m = make_model(ModelKind::D2Q9);
        let field = kolmogorov_init(&[48, 48], 0.1, 1, &m).unwrap();
        let mf = macro_fields(&field);
        let max_speed = mf
            .velocity
            .chunks(2)
            .map(|u| (u[0] * u[0] + u[1] * u[1]).sqrt())
            .fold(0.0f64, f64::max);
        assert_abs_diff_eq!(max_speed, 0.1, epsilon = 1e-12);
        // density exactly 1 everywhere after equilibrium init
        for rho in mf.density {
            assert_abs_diff_eq!(rho, 1.0, epsilon = 1e-13);
        }
        // U = 0 gives the uniform equilibrium
        let flat = kolmogorov_init(&[8, 8], 0.0, 1, &m).unwrap();
        for site in 0..flat.n_sites() {
            for p in 0..9 {
                assert_abs_diff_eq!(flat.site(site)[p], flat.model().weight(p), epsilon = 1e-16);
            }
        }
    }

    #[test]
    fn kolmogorov_rejects_bad_input() {
        let m1 = make_model(ModelKind::D1Q3);
        assert!(kolmogorov_init(&[16], 0.1, 1, &m1).is_err());
        let m2 = make_model(ModelKind::D2Q9);
        assert!(kolmogorov_init(&[16, 16], 0.25, 1, &m2).is_err());
    }

    #[test]
    fn reynolds_values() {
        let r = reynolds_report(1.0, 0.1, 48.0).unwrap();
        assert_abs_diff_eq!(r.viscosity, 1.0 / 6.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.reynolds, 28.8, epsilon = 1e-12);
        let r = reynolds_report(1.5, 0.1, 48.0).unwrap();
        assert_abs_diff_eq!(r.viscosity, 1.0 / 18.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.reynolds, 86.4, epsilon = 1e-12);
        let r = reynolds_report(1.9, 0.1, 48.0).unwrap();
        assert_abs_diff_eq!(r.reynolds, 547.2, epsilon = 1e-10);
        assert_abs_diff_eq!(
            r.kolmogorov_scale,
            48.0 / 547.2f64.powf(0.75),
            epsilon = 1e-12
        );
        assert!(reynolds_report(2.0, 0.1, 48.0).is_err());
    }

    #[test]
    fn snapshot_csv_layout() {
        let m = make_model(ModelKind::D1Q3);
        let field = random_field(&m, &[2], 5);
        let mut buf = Vec::new();
        write_snapshot_csv(&field, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "x,y,p,f");
        assert_eq!(lines.len(), 1 + 2 * 3);
        assert!(lines[1].starts_with("0,0,0,"));
    }
}
