//! Control recovery and evaluation metrics.
//!
//! Controls follow from the state trajectory by differential flatness: the
//! bank angle inverts `psidot = g tan(phi) / v`, and the remaining rates are
//! finite differences of the sampled sequences (central in the interior,
//! one-sided first order at the endpoints). Control norms are plain
//! Euclidean norms of the stacked samples, without time weighting.

use std::time::Duration;

use nalgebra::{DVector, Vector3};
use serde::Serialize;

use crate::basis::BasisSet;
use crate::model::{Limits, ProblemSpec};
use crate::solver::traversal::arc_length;
use crate::solver::{SolverState, TrajectorySolution};

#[derive(Debug, Clone, PartialEq)]
pub struct ControlProfile {
    pub v_dot: DVector<f64>,
    pub gamma_dot: DVector<f64>,
    pub phi: DVector<f64>,
    pub phi_dot: DVector<f64>,
    pub psi_dot: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolutionMetrics {
    pub gamma_dot_norm: f64,
    pub phi_dot_norm: f64,
    pub v_dot_norm: f64,
    pub final_position_residual: f64,
    pub arc_length: f64,
    pub wall_time: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Derivative of a uniformly sampled sequence with spacing `dt`.
pub fn finite_difference(f: &DVector<f64>, dt: f64) -> DVector<f64> {
    let n = f.len();
    let mut d = DVector::zeros(n);
    if n < 2 {
        return d;
    }
    d[0] = (f[1] - f[0]) / dt;
    d[n - 1] = (f[n - 1] - f[n - 2]) / dt;
    for t in 1..n - 1 {
        d[t] = (f[t + 1] - f[t - 1]) / (2.0 * dt);
    }
    d
}

pub fn recover_controls(state: &SolverState, basis: &BasisSet, limits: &Limits) -> ControlProfile {
    let dt = basis.dt();
    let psi_dot = basis.pdot() * &state.c_psi;
    let phi = DVector::from_iterator(
        basis.n(),
        state
            .v
            .iter()
            .zip(psi_dot.iter())
            .map(|(v, r)| (v * r / limits.g).atan()),
    );
    ControlProfile {
        v_dot: finite_difference(&state.v, dt),
        gamma_dot: finite_difference(&state.gamma, dt),
        phi_dot: finite_difference(&phi, dt),
        phi,
        psi_dot,
    }
}

pub fn compute_metrics(
    solution: &TrajectorySolution,
    controls: &ControlProfile,
    spec: &ProblemSpec,
    wall_time: Duration,
) -> SolutionMetrics {
    let last = solution.x.len() - 1;
    let end = Vector3::new(solution.x[last], solution.y[last], solution.z[last]);
    SolutionMetrics {
        gamma_dot_norm: controls.gamma_dot.norm(),
        phi_dot_norm: controls.phi_dot.norm(),
        v_dot_norm: controls.v_dot.norm(),
        final_position_residual: (end - spec.goal).norm(),
        arc_length: arc_length(&solution.x, &solution.y, &solution.z),
        wall_time: wall_time.as_secs_f64(),
        iterations: solution.iterations,
        converged: solution.converged(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::build_basis;
    use crate::model::{BoundaryState, ProblemSpec};
    use crate::solver::initialize_state;

    fn straight_state(n: usize) -> (SolverState, BasisSet, ProblemSpec) {
        let spec = ProblemSpec::new(BoundaryState::flying([0.0, 0.0, 30.0], 15.0, 0.0), [150.0, 0.0, 30.0]);
        let basis = build_basis(n, 10, 10.0).unwrap();
        let state = initialize_state(&spec, &basis).unwrap();
        (state, basis, spec)
    }

    #[test]
    fn steady_straight_flight_has_zero_controls() {
        let (mut state, basis, spec) = straight_state(30);
        state.v.fill(15.0);
        state.gamma.fill(0.05);
        state.c_psi.fill(0.3);
        let c = recover_controls(&state, &basis, &spec.limits);
        assert!(c.v_dot.amax() < 1e-12);
        assert!(c.gamma_dot.amax() < 1e-12);
        assert!(c.phi.amax() < 1e-12);
        assert!(c.psi_dot.amax() < 1e-12);
    }

    #[test]
    fn unit_tan_bank_gives_quarter_pi() {
        let (mut state, basis, spec) = straight_state(20);
        let v = 15.0;
        let rate = spec.limits.g / v;
        state.v.fill(v);
        // psi(tau) = rate * T * tau is linear; Bernstein coefficients are
        // the equally spaced control values.
        let k = state.c_psi.len();
        for j in 0..k {
            state.c_psi[j] = rate * basis.total_time() * j as f64 / (k - 1) as f64;
        }
        let c = recover_controls(&state, &basis, &spec.limits);
        for p in c.phi.iter() {
            assert!((p - std::f64::consts::FRAC_PI_4).abs() < 1e-10);
        }
    }

    #[test]
    fn finite_difference_is_second_order_inside() {
        let n = 101;
        let dt = 0.01;
        let f = DVector::from_fn(n, |t, _| (t as f64 * dt).sin());
        let d = finite_difference(&f, dt);
        for t in 1..n - 1 {
            assert!((d[t] - (t as f64 * dt).cos()).abs() < dt * dt);
        }
        assert!((d[0] - 1.0).abs() < dt);
    }
}
