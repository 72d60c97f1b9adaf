//! Heading block.
//!
//! The non-convex kinematic terms in `psi` are replaced by the surrogate
//! `rho_nh/2 (atan2(ydot, xdot) - psi)^2`. The heading-rate bound
//! `|psidot| <= g tan(phi_max) / v` is either folded into the cost through a
//! slack and multiplier (default) or enforced exactly by an inequality QP.

use std::f64::consts::PI;

use nalgebra::DVector;

use crate::basis::BasisSet;
use crate::error::Result;
use crate::model::ProblemSpec;
use crate::qp::solve_inequality_qp;
use crate::solver::kkt::KktCache;
use crate::solver::state::{boundary_heading, SolverState};
use crate::solver::HeadingVariant;

/// `atan2(ydot, xdot)` per sample, unwrapped into a continuous sequence whose
/// first value lies within pi of `reference`.
pub fn heading_target(xdot: &DVector<f64>, ydot: &DVector<f64>, reference: f64) -> DVector<f64> {
    let n = xdot.len();
    let mut theta = DVector::from_fn(n, |t, _| ydot[t].atan2(xdot[t]));
    for t in 1..n {
        let jump = theta[t] - theta[t - 1];
        theta[t] -= 2.0 * PI * (jump / (2.0 * PI)).round();
    }
    if n > 0 {
        let shift = 2.0 * PI * ((reference - theta[0]) / (2.0 * PI)).round();
        theta.add_scalar_mut(shift);
    }
    theta
}

/// Stacked heading-rate bound `[cap; cap]` with `cap = g tan(phi_max) / v`.
pub fn rate_bounds(spec: &ProblemSpec, v: &DVector<f64>) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |r, _| spec.limits.max_heading_rate(v[r % n]))
}

/// Heading target for the current position coefficients.
pub fn current_heading_target(state: &SolverState, spec: &ProblemSpec, basis: &BasisSet) -> Result<DVector<f64>> {
    let xdot = basis.pdot() * &state.c_x;
    let ydot = basis.pdot() * &state.c_y;
    Ok(heading_target(&xdot, &ydot, boundary_heading(spec)?))
}

/// Updates `c_psi` and, for the slack variant, `s_in` and `lambda_in`.
///
/// Uses the position coefficients of this iteration and the speed of the
/// previous one.
pub fn step_heading(
    state: &mut SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
    cache: &KktCache,
    variant: HeadingVariant,
) -> Result<()> {
    let w = &cache.weights;
    let psi0 = boundary_heading(spec)?;
    let theta = current_heading_target(state, spec, basis)?;
    let b_in = rate_bounds(spec, &state.v);
    let b_eq = DVector::from_column_slice(&[psi0, spec.start.heading_rate]);
    let linear = w.rho_nh * (&cache.p_t * &theta) + &state.lambda_psi;

    match variant {
        HeadingVariant::UnconstrainedAdmm => {
            let mut rhs = linear;
            if w.rho_in > 0.0 {
                let shift = &state.s_in - &b_in + &state.lambda_in / w.rho_in;
                rhs -= w.rho_in * cache.a_in_t_times(&shift);
            }
            let c_psi = cache.heading.solve(&rhs, &b_eq);
            if w.rho_in > 0.0 {
                let (s_in, lambda_in) =
                    update_slack_and_multiplier(&(&cache.a_in * &c_psi), &b_in, &state.lambda_in, w.rho_in);
                state.s_in = s_in;
                state.lambda_in = lambda_in;
            }
            state.c_psi = c_psi;
        }
        HeadingVariant::ConstrainedQp => {
            state.c_psi = solve_inequality_qp(
                &cache.q_heading_constrained,
                &(-linear),
                &cache.a_eq_heading,
                &b_eq,
                &cache.a_in,
                &b_in,
            )?;
        }
    }
    Ok(())
}

/// `s = max(0, -A c + b - lambda/rho)`, `lambda += rho (A c - b + s)`.
///
/// With `u` the unclipped slack, the multiplier update simplifies to
/// `rho max(0, -u)`; evaluating it that way makes it exactly zero whenever
/// `u >= 0`.
pub fn update_slack_and_multiplier(
    a_c: &DVector<f64>,
    b_in: &DVector<f64>,
    lambda_in: &DVector<f64>,
    rho_in: f64,
) -> (DVector<f64>, DVector<f64>) {
    let unclipped = b_in - a_c - lambda_in / rho_in;
    let s = unclipped.map(|u| u.max(0.0));
    let lambda = unclipped.map(|u| if u >= 0.0 { 0.0 } else { -rho_in * u });
    (s, lambda)
}
