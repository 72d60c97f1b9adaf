//! Bregman multiplier updates in coefficient space.
//!
//! Each multiplier accumulates the penalty-weighted constraint residuals
//! mapped through the transposed basis, so it has the size of a coefficient
//! vector instead of one entry per sample and constraint.

use nalgebra::DVector;

use crate::basis::BasisSet;
use crate::error::Result;
use crate::model::ProblemSpec;
use crate::solver::heading::current_heading_target;
use crate::solver::kkt::KktCache;
use crate::solver::state::{Axis, Samples, SolverState};
use crate::solver::steps::kinematic_target;

/// Coefficient-space residual `rho_nh Pdot' r_nh + rho_c P' sum_i r_fc,i` of
/// one axis.
pub fn axis_residual_term(
    axis: Axis,
    state: &SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
    cache: &KktCache,
) -> DVector<f64> {
    let w = &cache.weights;
    let a = axis.index();
    let n = basis.n();
    let s = Samples::of(state, basis);
    let (pos, vel) = match axis {
        Axis::X => (&s.x, &s.xdot),
        Axis::Y => (&s.y, &s.ydot),
        Axis::Z => (&s.z, &s.zdot),
    };
    let r_nh = vel - kinematic_target(axis, &s.psi, &state.gamma, &state.v);

    let mut r_fc = DVector::zeros(n);
    for (i, obs) in spec.obstacles.iter().enumerate() {
        for t in 0..n {
            let off = crate::model::polar_offset(obs, state.alpha[(i, t)], state.beta[(i, t)], state.d[(i, t)]);
            r_fc[t] += pos[t] - obs.center[a] - off[a];
        }
    }
    w.rho_nh * (&cache.pdot_t * r_nh) + w.rho_c * (&cache.p_t * r_fc)
}

/// Heading multiplier term `rho_nh P' (P c_psi - theta)` for the surrogate.
pub fn heading_residual_term(
    state: &SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
    cache: &KktCache,
) -> Result<DVector<f64>> {
    let theta = current_heading_target(state, spec, basis)?;
    let r = basis.p() * &state.c_psi - theta;
    Ok(cache.weights.rho_nh * (&cache.p_t * r))
}

/// Applies `lambda <- lambda - residual term` to all four multipliers.
pub fn update_bregman_multipliers(
    state: &mut SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
    cache: &KktCache,
) -> Result<()> {
    let dx = axis_residual_term(Axis::X, state, spec, basis, cache);
    let dy = axis_residual_term(Axis::Y, state, spec, basis, cache);
    let dz = axis_residual_term(Axis::Z, state, spec, basis, cache);
    let dpsi = heading_residual_term(state, spec, basis, cache)?;
    state.lambda_x -= dx;
    state.lambda_y -= dy;
    state.lambda_z -= dz;
    state.lambda_psi -= dpsi;
    Ok(())
}
