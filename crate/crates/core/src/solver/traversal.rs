//! Traversal-time heuristic: a short smoothness + collision pre-solve whose
//! arc length, flown at `v_min`, sets the horizon.

use nalgebra::DVector;

use crate::basis::build_basis;
use crate::error::Result;
use crate::model::{ProblemSpec, Weights};
use crate::solver::kkt::KktCache;
use crate::solver::multipliers::axis_residual_term;
use crate::solver::state::{init_with_heading, Axis};
use crate::solver::steps::{step_obstacle_angles, step_obstacle_distance, step_position_axis};

/// Lower bound on the returned time, per sample.
pub const TIME_FLOOR_PER_SAMPLE: f64 = 0.01;

/// Sum of segment chords of a sampled 3D curve.
pub fn arc_length(x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>) -> f64 {
    (1..x.len())
        .map(|t| {
            let (dx, dy, dz) = (x[t] - x[t - 1], y[t] - y[t - 1], z[t] - z[t - 1]);
            (dx * dx + dy * dy + dz * dz).sqrt()
        })
        .sum()
}

pub fn estimate_traversal_time(spec: &ProblemSpec, pre_iterations: usize) -> Result<f64> {
    let n = spec.horizon.n;
    let floor = n as f64 * TIME_FLOOR_PER_SAMPLE;
    let provisional = ((spec.goal - spec.start.position).norm() / spec.limits.v_min).max(floor);
    let basis = build_basis(n, spec.horizon.degree, provisional)?;

    // Kinematics and bounds are ignored: rho_nh = 0 drops every heading,
    // speed and flight-path term from the position QP.
    let weights = Weights {
        rho_nh: 0.0,
        ..spec.weights
    };
    let cache = KktCache::new(&basis, &weights, spec.n_obstacles())?;
    let mut state = init_with_heading(spec, &basis, 0.0)?;

    for _ in 0..pre_iterations {
        for axis in Axis::ALL {
            let c = step_position_axis(axis, &state, spec, &basis, &cache)?;
            *state.coeffs_mut(axis) = c;
        }
        let (alpha, beta) = step_obstacle_angles(&state, spec, &basis);
        state.alpha = alpha;
        state.beta = beta;
        state.d = step_obstacle_distance(&state, spec, &basis);
        let deltas = Axis::ALL.map(|axis| axis_residual_term(axis, &state, spec, &basis, &cache));
        state.lambda_x -= &deltas[0];
        state.lambda_y -= &deltas[1];
        state.lambda_z -= &deltas[2];
    }

    let x = basis.p() * &state.c_x;
    let y = basis.p() * &state.c_y;
    let z = basis.p() * &state.c_z;
    Ok((arc_length(&x, &y, &z) / spec.limits.v_min).max(floor))
}
