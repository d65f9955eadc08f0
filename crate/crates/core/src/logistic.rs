//! Carleman ladder for the logistic equation du/dt = -u (1 - R u).
//!
//! Renaming u_k = u^k turns the scalar ODE into the open linear chain
//! du_k/dt = -k (u_k - R u_{k+1}); truncating at order K closes it with
//! du_K/dt = -K u_K. Integrated with explicit Euler; the convergence demo
//! against a fine-step reference is the point, not the integrator.

use crate::error::{Error, Result};

/// Truncated Carleman ladder trajectory.
#[derive(Debug, Clone)]
pub struct LogisticLadder {
    pub u0: f64,
    pub nonlinearity: f64,
    pub truncation: usize,
    pub dt: f64,
    /// u_1 sampled at t = 0, dt, 2 dt, ...
    pub trajectory: Vec<f64>,
}

impl LogisticLadder {
    pub fn final_value(&self) -> f64 {
        *self.trajectory.last().unwrap()
    }
}

/// Integrates the K-truncated ladder with initial data u_k(0) = u0^k.
pub fn logistic_carleman(
    u0: f64,
    nonlinearity: f64,
    truncation: usize,
    t_final: f64,
    dt: f64,
) -> Result<LogisticLadder> {
    if truncation == 0 {
        return Err(Error::invalid("truncation order K must be at least 1"));
    }
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return Err(Error::invalid("need dt > 0 and t_final >= 0"));
    }
    if (nonlinearity * u0).abs() >= 1.0 {
        return Err(Error::invalid(format!(
            "|R u0| = {} >= 1: the Carleman ladder does not converge",
            (nonlinearity * u0).abs()
        )));
    }
    let k = truncation;
    let mut u: Vec<f64> = (1..=k).map(|j| u0.powi(j as i32)).collect();
    let n_steps = (t_final / dt).round() as usize;
    let mut trajectory = Vec::with_capacity(n_steps + 1);
    trajectory.push(u[0]);
    let mut du = vec![0.0; k];
    for _ in 0..n_steps {
        for j in 1..=k {
            du[j - 1] = if j < k {
                -(j as f64) * (u[j - 1] - nonlinearity * u[j])
            } else {
                -(k as f64) * u[k - 1]
            };
        }
        for j in 0..k {
            u[j] += dt * du[j];
        }
        trajectory.push(u[0]);
    }
    Ok(LogisticLadder {
        u0,
        nonlinearity,
        truncation: k,
        dt,
        trajectory,
    })
}

/// Fine-step Euler integration of the original nonlinear equation, sampled at
/// multiples of `dt_sample`. Independent of the ladder path; serves as the
/// reference for convergence studies.
pub fn logistic_reference(
    u0: f64,
    nonlinearity: f64,
    t_final: f64,
    dt_sample: f64,
    dt_fine: f64,
) -> Result<Vec<f64>> {
    if !(dt_fine > 0.0 && dt_sample > 0.0) {
        return Err(Error::invalid("need positive step sizes"));
    }
    let n_samples = (t_final / dt_sample).round() as usize;
    let per_sample = (dt_sample / dt_fine).round() as usize;
    if per_sample == 0 {
        return Err(Error::invalid("dt_fine must not exceed dt_sample"));
    }
    let mut u = u0;
    let mut out = Vec::with_capacity(n_samples + 1);
    out.push(u);
    for _ in 0..n_samples {
        for _ in 0..per_sample {
            u += dt_fine * (-u * (1.0 - nonlinearity * u));
        }
        out.push(u);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn zero_nonlinearity_is_euler_decay() {
        let ladder = logistic_carleman(0.7, 0.0, 4, 1.0, 1e-3).unwrap();
        let expect = 0.7 * (1.0f64 - 1e-3).powi(1000);
        assert_abs_diff_eq!(ladder.final_value(), expect, epsilon = 1e-12);
    }

    #[test]
    fn zero_initial_stays_zero() {
        let ladder = logistic_carleman(0.0, 0.3, 3, 2.0, 1e-3).unwrap();
        assert!(ladder.trajectory.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn preconditions() {
        assert!(logistic_carleman(0.5, 0.2, 0, 1.0, 1e-3).is_err());
        assert!(logistic_carleman(0.5, 2.5, 2, 1.0, 1e-3).is_err());
        assert!(logistic_carleman(0.5, 0.2, 2, 1.0, 0.0).is_err());
    }

    #[test]
    fn truncation_error_decreases_in_k() {
        // Oracle: fine-step integration of the original logistic equation.
        let reference = *logistic_reference(0.5, 0.2, 1.0, 1.0, 1e-6)
            .unwrap()
            .last()
            .unwrap();
        let mut last_err = f64::INFINITY;
        for k in 1..=5 {
            let ladder = logistic_carleman(0.5, 0.2, k, 1.0, 1e-3).unwrap();
            let err = (ladder.final_value() - reference).abs();
            assert!(
                err < last_err,
                "K={k}: error {err} did not improve on {last_err}"
            );
            last_err = err;
        }
    }

    #[test]
    fn decoupled_columns_identical_when_r_zero() {
        let a = logistic_carleman(0.4, 0.0, 1, 1.0, 1e-3).unwrap();
        let b = logistic_carleman(0.4, 0.0, 5, 1.0, 1e-3).unwrap();
        for (x, y) in a.trajectory.iter().zip(&b.trajectory) {
            assert_eq!(x, y);
        }
    }
}
