//! Block updates of the alternating minimization, except the heading step.
//!
//! The position step is an equality-constrained QP per axis. The remaining
//! blocks decouple per sample (and per obstacle) and are solved pointwise.

use std::f64::consts::FRAC_PI_2;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::basis::BasisSet;
use crate::error::Result;
use crate::model::{Limits, ProblemSpec};
use crate::solver::kkt::KktCache;
use crate::solver::state::{Axis, Samples, SolverState};

/// Floor on the quadratic coefficient of the distance subproblem.
pub const DISTANCE_DENOM_FLOOR: f64 = 1e-12;

/// Minimizes the axis QP: smoothness, goal pull (for the terminal sample),
/// kinematic and collision penalties, minus the Bregman multiplier term,
/// subject to position/velocity/acceleration boundary rows.
pub fn step_position_axis(
    axis: Axis,
    state: &SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
    cache: &KktCache,
) -> Result<DVector<f64>> {
    let rhs = position_rhs(axis, state, spec, basis, cache);
    let a = axis.index();
    let b_eq = DVector::from_column_slice(&[
        spec.start.position[a],
        spec.start.velocity[a],
        spec.start.acceleration[a],
    ]);
    Ok(cache.position.solve(&rhs, &b_eq))
}

/// Negated linear cost of the axis QP (`-q - b_fc - b_nh + lambda`).
pub fn position_rhs(
    axis: Axis,
    state: &SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
    cache: &KktCache,
) -> DVector<f64> {
    let w = &cache.weights;
    let n = basis.n();
    let a = axis.index();
    let psi = basis.p() * &state.c_psi;

    let nh_target = kinematic_target(axis, &psi, &state.gamma, &state.v);

    let mut coll_target = DVector::zeros(n);
    for (i, obs) in spec.obstacles.iter().enumerate() {
        let center = obs.center[a];
        let axis_len = obs.semi_axes[a];
        for t in 0..n {
            let (sa, ca) = state.alpha[(i, t)].sin_cos();
            let (sb, cb) = state.beta[(i, t)].sin_cos();
            let dir = match axis {
                Axis::X => sb * ca,
                Axis::Y => sb * sa,
                Axis::Z => cb,
            };
            coll_target[t] += center + axis_len * state.d[(i, t)] * dir;
        }
    }

    let mut rhs = w.rho_nh * (&cache.pdot_t * nh_target) + w.rho_c * (&cache.p_t * coll_target);
    let last = basis.p().row(n - 1);
    rhs += (w.w_goal * spec.goal[a]) * last.transpose();
    rhs += state.multiplier(axis);
    rhs
}

/// Velocity the kinematic model asks of `axis`: `v cos(psi) cos(gamma)`,
/// `v sin(psi) cos(gamma)` or `-v sin(gamma)`.
pub fn kinematic_target(
    axis: Axis,
    psi: &DVector<f64>,
    gamma: &DVector<f64>,
    v: &DVector<f64>,
) -> DVector<f64> {
    DVector::from_fn(v.len(), |t, _| {
        let (sg, cg) = gamma[t].sin_cos();
        match axis {
            Axis::X => v[t] * psi[t].cos() * cg,
            Axis::Y => v[t] * psi[t].sin() * cg,
            Axis::Z => -v[t] * sg,
        }
    })
}

/// Flight-path angle minimizing the kinematic penalty at one sample, clipped
/// to `[-gamma_max, gamma_max]`.
pub fn flight_path_angle(xdot: f64, ydot: f64, zdot: f64, psi: f64, gamma_max: f64) -> f64 {
    let along = xdot * psi.cos() + ydot * psi.sin();
    (-zdot).atan2(along).clamp(-gamma_max, gamma_max)
}

pub fn step_flight_path(state: &SolverState, spec: &ProblemSpec, basis: &BasisSet) -> DVector<f64> {
    let s = Samples::of(state, basis);
    let gmax = spec.limits.gamma_max;
    DVector::from_fn(basis.n(), |t, _| {
        flight_path_angle(s.xdot[t], s.ydot[t], s.zdot[t], s.psi[t], gmax)
    })
}

/// Upper speed bound: `v_max`, tightened by the bank limit when turning.
pub fn speed_cap(psidot: f64, limits: &Limits) -> f64 {
    if psidot == 0.0 {
        limits.v_max
    } else {
        limits.v_max.min(limits.g * limits.phi_max.tan() / psidot.abs())
    }
}

/// Speed of the current position derivative, clipped to the flight envelope.
/// When the bank cap falls below `v_min`, `v_min` wins: the vehicle cannot fly
/// slower.
pub fn forward_speed(xdot: f64, ydot: f64, zdot: f64, psidot: f64, limits: &Limits) -> f64 {
    let raw = (xdot * xdot + ydot * ydot + zdot * zdot).sqrt();
    raw.min(speed_cap(psidot, limits)).max(limits.v_min)
}

pub fn step_velocity(state: &SolverState, spec: &ProblemSpec, basis: &BasisSet) -> DVector<f64> {
    let s = Samples::of(state, basis);
    DVector::from_fn(basis.n(), |t, _| {
        forward_speed(s.xdot[t], s.ydot[t], s.zdot[t], s.psidot[t], &spec.limits)
    })
}

/// Direction angles minimizing `|| delta - d diag(axes) u(alpha, beta) ||^2`
/// over the unit sphere at fixed `d`.
///
/// For spheres this is the radial direction of `delta`. For general
/// ellipsoids the minimizer satisfies `(M - mu I) u = h` with
/// `M = d^2 diag(axes^2)`, `h = d axes .* delta`, `mu <= min(M)`; `mu` is the
/// root of the secular equation `||u(mu)|| = 1`.
///
/// A sample at the center returns `(0, pi/2)`.
pub fn obstacle_angles(delta: &Vector3<f64>, axes: &Vector3<f64>, d: f64) -> (f64, f64) {
    if delta.x == 0.0 && delta.y == 0.0 && delta.z == 0.0 {
        return (0.0, FRAC_PI_2);
    }
    let u = if axes.x == axes.y && axes.y == axes.z {
        delta.normalize()
    } else {
        scaled_sphere_direction(delta, axes, d)
    };
    direction_to_angles(&u)
}

pub fn direction_to_angles(u: &Vector3<f64>) -> (f64, f64) {
    let alpha = u.y.atan2(u.x);
    let beta = u.x.hypot(u.y).atan2(u.z);
    (alpha, beta)
}

fn scaled_sphere_direction(delta: &Vector3<f64>, axes: &Vector3<f64>, d: f64) -> Vector3<f64> {
    let m = axes.component_mul(axes) * (d * d);
    let h = axes.component_mul(delta) * d;
    let m_min = m.min();
    let gap = m.add_scalar(-m_min);
    let h_norm = h.norm();
    let flat = |i: usize| gap[i] <= 1e-14 * m_min;

    // Hard case: no pull along the flattest axes and the remaining pull fits
    // inside the unit sphere, so mu sits exactly at min(M).
    if (0..3).filter(|&i| flat(i)).all(|i| h[i].abs() <= 1e-14 * h_norm) {
        let mut u = Vector3::zeros();
        let mut used = 0.0;
        for i in (0..3).filter(|&i| !flat(i)) {
            u[i] = h[i] / gap[i];
            used += u[i] * u[i];
        }
        if used <= 1.0 {
            let first_flat = (0..3).find(|&i| flat(i)).expect("some axis is the smallest");
            u[first_flat] = (1.0 - used).sqrt();
            return u;
        }
    }

    // phi(s) = sum h_i^2 / (gap_i + s)^2 decreases in s; solve phi(s) = 1 on
    // (0, ||h||] with safeguarded Newton on 1/sqrt(phi) - 1, which is almost linear.
    let phi = |s: f64| -> (f64, f64) {
        let mut val = 0.0;
        let mut der = 0.0;
        for i in 0..3 {
            let q = gap[i] + s;
            if q > 0.0 {
                val += h[i] * h[i] / (q * q);
                der += h[i] * h[i] / (q * q * q);
            }
        }
        (val, der)
    };
    let mut lo = 0.0;
    let mut hi = h_norm;
    let mut s = hi;
    for _ in 0..100 {
        let (val, der) = phi(s);
        if val <= 0.0 {
            hi = s;
            s = 0.5 * (lo + hi);
            continue;
        }
        let g = 1.0 / val.sqrt() - 1.0;
        if g > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        if g.abs() <= 1e-15 || hi - lo <= 1e-16 * hi {
            break;
        }
        let slope = der / (val * val.sqrt());
        let next = s - g / slope;
        s = if next > lo && next < hi {
            next
        } else {
            0.5 * (lo + hi)
        };
    }
    let u = Vector3::from_fn(|i, _| {
        let q = gap[i] + s;
        if q > 0.0 {
            h[i] / q
        } else {
            0.0
        }
    });
    let norm = u.norm();
    if norm > 0.0 {
        u / norm
    } else {
        Vector3::x()
    }
}

/// Angles and polar distance of the axis-scaled offset `delta ./ axes`; the
/// exact zero-residual decomposition for samples outside the ellipsoid.
pub fn normalized_projection(delta: &Vector3<f64>, axes: &Vector3<f64>) -> (f64, f64, f64) {
    let q = delta.component_div(axes);
    let r = q.norm();
    if r == 0.0 {
        return (0.0, FRAC_PI_2, 0.0);
    }
    let (alpha, beta) = direction_to_angles(&q);
    (alpha, beta, r)
}

pub fn step_obstacle_angles(
    state: &SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let s = Samples::of(state, basis);
    let (m, n) = (spec.n_obstacles(), basis.n());
    let mut alpha = DMatrix::zeros(m, n);
    let mut beta = DMatrix::zeros(m, n);
    for (i, obs) in spec.obstacles.iter().enumerate() {
        for t in 0..n {
            let delta = s.point(t) - obs.center;
            let (a, b) = obstacle_angles(&delta, &obs.semi_axes, state.d[(i, t)]);
            alpha[(i, t)] = a;
            beta[(i, t)] = b;
        }
    }
    (alpha, beta)
}

/// Stationary point `N / D` of the scalar distance quadratic, clipped to
/// `[1, inf)`.
pub fn obstacle_distance(delta: &Vector3<f64>, axes: &Vector3<f64>, alpha: f64, beta: f64) -> f64 {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let dir = Vector3::new(axes.x * sb * ca, axes.y * sb * sa, axes.z * cb);
    let num = dir.dot(delta);
    let den = dir.norm_squared().max(DISTANCE_DENOM_FLOOR);
    (num / den).max(1.0)
}

pub fn step_obstacle_distance(
    state: &SolverState,
    spec: &ProblemSpec,
    basis: &BasisSet,
) -> DMatrix<f64> {
    let s = Samples::of(state, basis);
    let (m, n) = (spec.n_obstacles(), basis.n());
    DMatrix::from_fn(m, n, |i, t| {
        let obs = &spec.obstacles[i];
        obstacle_distance(
            &(s.point(t) - obs.center),
            &obs.semi_axes,
            state.alpha[(i, t)],
            state.beta[(i, t)],
        )
    })
}
