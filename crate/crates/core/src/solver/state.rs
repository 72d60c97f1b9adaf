use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, Vector3};

use crate::basis::BasisSet;
use crate::error::{Error, Result};
use crate::model::ProblemSpec;
use crate::solver::kkt::KktCache;
use crate::solver::steps::normalized_projection;

/// All per-iteration unknowns of the alternating minimization.
///
/// Obstacle variables (`alpha`, `beta`, `d`) are `m x n`; the heading-rate
/// slack and its multiplier are `2n` (upper bound rows first).
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub c_x: DVector<f64>,
    pub c_y: DVector<f64>,
    pub c_z: DVector<f64>,
    pub c_psi: DVector<f64>,
    pub v: DVector<f64>,
    pub gamma: DVector<f64>,
    pub alpha: DMatrix<f64>,
    pub beta: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub lambda_x: DVector<f64>,
    pub lambda_y: DVector<f64>,
    pub lambda_z: DVector<f64>,
    pub lambda_psi: DVector<f64>,
    pub lambda_in: DVector<f64>,
    pub s_in: DVector<f64>,
    pub iter: usize,
}

impl SolverState {
    pub fn coeffs(&self, axis: Axis) -> &DVector<f64> {
        match axis {
            Axis::X => &self.c_x,
            Axis::Y => &self.c_y,
            Axis::Z => &self.c_z,
        }
    }

    pub fn coeffs_mut(&mut self, axis: Axis) -> &mut DVector<f64> {
        match axis {
            Axis::X => &mut self.c_x,
            Axis::Y => &mut self.c_y,
            Axis::Z => &mut self.c_z,
        }
    }

    pub fn multiplier(&self, axis: Axis) -> &DVector<f64> {
        match axis {
            Axis::X => &self.lambda_x,
            Axis::Y => &self.lambda_y,
            Axis::Z => &self.lambda_z,
        }
    }

    /// Name of the first field holding a NaN or infinity, if any.
    pub fn first_non_finite(&self) -> Option<&'static str> {
        let vecs: [(&'static str, &DVector<f64>); 10] = [
            ("c_x", &self.c_x),
            ("c_y", &self.c_y),
            ("c_z", &self.c_z),
            ("c_psi", &self.c_psi),
            ("v", &self.v),
            ("gamma", &self.gamma),
            ("lambda_x", &self.lambda_x),
            ("lambda_y", &self.lambda_y),
            ("lambda_z", &self.lambda_z),
            ("lambda_psi", &self.lambda_psi),
        ];
        for (name, v) in vecs {
            if !v.iter().all(|x| x.is_finite()) {
                return Some(name);
            }
        }
        for (name, v) in [("lambda_in", &self.lambda_in), ("s_in", &self.s_in)] {
            if !v.iter().all(|x| x.is_finite()) {
                return Some(name);
            }
        }
        for (name, m) in [("alpha", &self.alpha), ("beta", &self.beta), ("d", &self.d)] {
            if !m.iter().all(|x| x.is_finite()) {
                return Some(name);
            }
        }
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Axis::X => "x",
            Axis::Y => "y",
            Axis::Z => "z",
        }
    }
}

/// Position and heading samples derived from the current coefficients.
#[derive(Debug, Clone)]
pub struct Samples {
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub xdot: DVector<f64>,
    pub ydot: DVector<f64>,
    pub zdot: DVector<f64>,
    pub psi: DVector<f64>,
    pub psidot: DVector<f64>,
}

impl Samples {
    pub fn of(state: &SolverState, basis: &BasisSet) -> Self {
        let p = basis.p();
        let pd = basis.pdot();
        Samples {
            x: p * &state.c_x,
            y: p * &state.c_y,
            z: p * &state.c_z,
            xdot: pd * &state.c_x,
            ydot: pd * &state.c_y,
            zdot: pd * &state.c_z,
            psi: p * &state.c_psi,
            psidot: pd * &state.c_psi,
        }
    }

    pub fn point(&self, t: usize) -> Vector3<f64> {
        Vector3::new(self.x[t], self.y[t], self.z[t])
    }
}

/// Heading used for the boundary rows: explicit value, else the direction of
/// the initial horizontal velocity, else the bearing to the goal.
pub fn boundary_heading(spec: &ProblemSpec) -> Result<f64> {
    if let Some(h) = spec.start.heading {
        return Ok(h);
    }
    let vel = spec.start.velocity;
    if vel.x != 0.0 || vel.y != 0.0 {
        return Ok(vel.y.atan2(vel.x));
    }
    if spec.goal == spec.start.position {
        return Err(Error::DegenerateSpec(
            "start equals goal and no start heading was supplied".into(),
        ));
    }
    let delta = spec.goal - spec.start.position;
    Ok(delta.y.atan2(delta.x))
}

/// Shifts `angle` by a multiple of 2 pi so it lies within pi of `reference`.
pub fn wrap_near(angle: f64, reference: f64) -> f64 {
    let k = ((reference - angle) / (2.0 * PI)).round();
    angle + 2.0 * PI * k
}

/// Builds the starting point of the iteration from the straight line
/// start -> goal.
pub fn initialize_state(spec: &ProblemSpec, basis: &BasisSet) -> Result<SolverState> {
    let psi0 = boundary_heading(spec)?;
    let delta = spec.goal - spec.start.position;
    let bearing = if delta.x == 0.0 && delta.y == 0.0 {
        psi0
    } else {
        wrap_near(delta.y.atan2(delta.x), psi0)
    };
    init_with_heading(spec, basis, bearing)
}

pub(crate) fn init_with_heading(
    spec: &ProblemSpec,
    basis: &BasisSet,
    heading: f64,
) -> Result<SolverState> {
    let n = basis.n();
    let k = basis.n_coeffs();
    let m = spec.n_obstacles();
    let total = basis.total_time();
    let start = spec.start.position;
    let delta = spec.goal - start;

    let fit = KktCache::line_fit(basis)?;
    let mut coeffs = [DVector::zeros(k), DVector::zeros(k), DVector::zeros(k)];
    for axis in Axis::ALL {
        let a = axis.index();
        let line = DVector::from_iterator(
            n,
            basis.t_samples().iter().map(|&t| start[a] + delta[a] * t / total),
        );
        let b_eq = DVector::from_column_slice(&[
            start[a],
            spec.start.velocity[a],
            spec.start.acceleration[a],
        ]);
        coeffs[a] = fit.solve(&(basis.p().transpose() * line), &b_eq);
    }
    let [c_x, c_y, c_z] = coeffs;

    let lim = &spec.limits;
    let speed = (delta.norm() / total).clamp(lim.v_min, lim.v_max);

    let x = basis.p() * &c_x;
    let y = basis.p() * &c_y;
    let z = basis.p() * &c_z;
    let mut alpha = DMatrix::zeros(m, n);
    let mut beta = DMatrix::zeros(m, n);
    let mut d = DMatrix::zeros(m, n);
    for (i, obs) in spec.obstacles.iter().enumerate() {
        for t in 0..n {
            let p = Vector3::new(x[t], y[t], z[t]);
            let (a, b, dist) = normalized_projection(&(p - obs.center), &obs.semi_axes);
            alpha[(i, t)] = a;
            beta[(i, t)] = b;
            d[(i, t)] = dist.max(1.0);
        }
    }

    Ok(SolverState {
        c_x,
        c_y,
        c_z,
        c_psi: DVector::from_element(k, heading),
        v: DVector::from_element(n, speed),
        gamma: DVector::zeros(n),
        alpha,
        beta,
        d,
        lambda_x: DVector::zeros(k),
        lambda_y: DVector::zeros(k),
        lambda_z: DVector::zeros(k),
        lambda_psi: DVector::zeros(k),
        lambda_in: DVector::zeros(2 * n),
        s_in: DVector::zeros(2 * n),
        iter: 0,
    })
}
