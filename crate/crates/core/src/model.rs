//! Problem data and constraint residual evaluators.
//!
//! Obstacles are axis-aligned ellipsoids stored already inflated by the
//! vehicle radius. The polar collision model writes the robot-to-obstacle
//! offset as `(a d sin(beta) cos(alpha), b d sin(beta) sin(alpha), c d cos(beta))`;
//! `d >= 1` means the sample lies on or outside the ellipsoid.

use nalgebra::{DMatrix, DVector, Vector3};

use crate::error::{Error, Result};

/// Axis-aligned ellipsoidal obstacle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipsoid {
    pub center: Vector3<f64>,
    pub semi_axes: Vector3<f64>,
}

impl Ellipsoid {
    pub fn new(center: [f64; 3], semi_axes: [f64; 3]) -> Self {
        Ellipsoid {
            center: Vector3::from(center),
            semi_axes: Vector3::from(semi_axes),
        }
    }

    pub fn sphere(center: [f64; 3], radius: f64) -> Self {
        Ellipsoid::new(center, [radius; 3])
    }

    /// Left-hand side of the quadratic avoidance inequality; `<= 0` is
    /// collision-free.
    pub fn avoidance_lhs(&self, p: &Vector3<f64>) -> f64 {
        let q = (p - self.center).component_div(&self.semi_axes);
        1.0 - q.norm_squared()
    }

    /// Offset from the center scaled by the semi-axes; its norm is the polar
    /// distance `d` at which the sample sits.
    pub fn normalized_offset(&self, p: &Vector3<f64>) -> Vector3<f64> {
        (p - self.center).component_div(&self.semi_axes)
    }

    pub fn is_sphere(&self) -> bool {
        self.semi_axes.x == self.semi_axes.y && self.semi_axes.y == self.semi_axes.z
    }
}

/// Vehicle bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limits {
    pub v_min: f64,
    pub v_max: f64,
    pub gamma_max: f64,
    pub phi_max: f64,
    pub g: f64,
}

impl Default for Limits {
    fn default() -> Self {
        Limits {
            v_min: 12.0,
            v_max: 20.0,
            gamma_max: 25f64.to_radians(),
            phi_max: 40f64.to_radians(),
            g: 9.81,
        }
    }
}

impl Limits {
    pub fn validate(&self) -> Result<()> {
        let half_pi = std::f64::consts::FRAC_PI_2;
        if !(self.v_min.is_finite() && self.v_min > 0.0) {
            return Err(Error::validation("limits.v_min", "must be positive"));
        }
        if !(self.v_max.is_finite() && self.v_min < self.v_max) {
            return Err(Error::validation("limits.v_min", "must be strictly below limits.v_max"));
        }
        if !(self.gamma_max > 0.0 && self.gamma_max < half_pi) {
            return Err(Error::validation("limits.gamma_max", "must lie in (0, pi/2)"));
        }
        if !(self.phi_max > 0.0 && self.phi_max < half_pi) {
            return Err(Error::validation("limits.phi_max", "must lie in (0, pi/2)"));
        }
        if !(self.g.is_finite() && self.g > 0.0) {
            return Err(Error::validation("limits.g", "must be positive"));
        }
        Ok(())
    }

    /// Largest heading rate the bank limit allows at speed `v`.
    pub fn max_heading_rate(&self, v: f64) -> f64 {
        self.g / v * self.phi_max.tan()
    }
}

/// Initial condition on position and its first two derivatives plus heading.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryState {
    pub position: Vector3<f64>,
    pub velocity: Vector3<f64>,
    pub acceleration: Vector3<f64>,
    /// `None` lets the solver derive it from the velocity or the goal bearing.
    pub heading: Option<f64>,
    pub heading_rate: f64,
}

impl BoundaryState {
    pub fn at_rest(position: [f64; 3]) -> Self {
        BoundaryState {
            position: Vector3::from(position),
            velocity: Vector3::zeros(),
            acceleration: Vector3::zeros(),
            heading: None,
            heading_rate: 0.0,
        }
    }

    /// Level flight at `speed` along `heading`.
    pub fn flying(position: [f64; 3], speed: f64, heading: f64) -> Self {
        BoundaryState {
            position: Vector3::from(position),
            velocity: Vector3::new(speed * heading.cos(), speed * heading.sin(), 0.0),
            acceleration: Vector3::zeros(),
            heading: Some(heading),
            heading_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Weights {
    pub rho_nh: f64,
    pub rho_c: f64,
    pub rho_in: f64,
    pub w_goal: f64,
    pub w_smooth: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Weights {
            rho_nh: 1.0,
            rho_c: 1.0,
            rho_in: 1.0,
            w_goal: 1.0,
            w_smooth: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TotalTime {
    Fixed(f64),
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Horizon {
    pub n: usize,
    pub degree: usize,
    pub total_time: TotalTime,
}

impl Default for Horizon {
    fn default() -> Self {
        Horizon {
            n: 50,
            degree: 10,
            total_time: TotalTime::Auto,
        }
    }
}

/// Everything the optimizer needs to know about one planning query.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    pub start: BoundaryState,
    pub goal: Vector3<f64>,
    pub limits: Limits,
    pub obstacles: Vec<Ellipsoid>,
    pub weights: Weights,
    pub horizon: Horizon,
}

impl ProblemSpec {
    pub fn new(start: BoundaryState, goal: [f64; 3]) -> Self {
        ProblemSpec {
            start,
            goal: Vector3::from(goal),
            limits: Limits::default(),
            obstacles: Vec::new(),
            weights: Weights::default(),
            horizon: Horizon::default(),
        }
    }

    pub fn n_obstacles(&self) -> usize {
        self.obstacles.len()
    }

    pub fn validate(&self) -> Result<()> {
        self.limits.validate()?;
        let finite3 = |v: &Vector3<f64>| v.iter().all(|x| x.is_finite());
        if !finite3(&self.goal) {
            return Err(Error::validation("goal", "must be finite"));
        }
        let s = &self.start;
        if !(finite3(&s.position) && finite3(&s.velocity) && finite3(&s.acceleration)) {
            return Err(Error::validation("start", "must be finite"));
        }
        if !s.heading.is_none_or(f64::is_finite) || !s.heading_rate.is_finite() {
            return Err(Error::validation("start.heading", "must be finite"));
        }
        let w = &self.weights;
        for (name, value) in [
            ("weights.rho_nh", w.rho_nh),
            ("weights.rho_c", w.rho_c),
            ("weights.rho_in", w.rho_in),
        ] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(Error::validation(name, "must be non-negative"));
            }
        }
        for (name, value) in [("weights.w_goal", w.w_goal), ("weights.w_smooth", w.w_smooth)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::validation(name, "must be positive"));
            }
        }
        if self.horizon.n < crate::basis::MIN_SAMPLES {
            return Err(Error::validation("horizon.n", "need at least 3 samples"));
        }
        if self.horizon.degree < crate::basis::MIN_DEGREE {
            return Err(Error::validation("horizon.degree", "must be at least 4"));
        }
        if let TotalTime::Fixed(t) = self.horizon.total_time {
            if !(t.is_finite() && t > 0.0) {
                return Err(Error::validation("horizon.total_time", "must be positive"));
            }
        }
        for (i, obs) in self.obstacles.iter().enumerate() {
            if !finite3(&obs.center) {
                return Err(Error::validation(format!("obstacles[{i}].center"), "must be finite"));
            }
            if !obs.semi_axes.iter().all(|&a| a.is_finite() && a > 0.0) {
                return Err(Error::validation(
                    format!("obstacles[{i}].semi_axes"),
                    "must be positive",
                ));
            }
            if obs.avoidance_lhs(&s.position) >= 0.0 {
                return Err(Error::validation(
                    "start.position",
                    format!("lies inside inflated obstacle {i}"),
                ));
            }
        }
        Ok(())
    }
}

/// Grows every semi-axis by the vehicle radius.
pub fn inflate_obstacles(raw: &[Ellipsoid], vehicle_radius: f64) -> Vec<Ellipsoid> {
    raw.iter()
        .map(|e| Ellipsoid {
            center: e.center,
            semi_axes: e.semi_axes.add_scalar(vehicle_radius),
        })
        .collect()
}

/// Stacked kinematic residuals `[xdot - v cos(psi) cos(gamma); ydot - v sin(psi) cos(gamma); zdot + v sin(gamma)]`,
/// one block of `n` per axis.
pub fn eval_kinematic_residual(
    xdot: &DVector<f64>,
    ydot: &DVector<f64>,
    zdot: &DVector<f64>,
    psi: &DVector<f64>,
    gamma: &DVector<f64>,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = xdot.len();
    Error::check_len("ydot", n, ydot.len())?;
    Error::check_len("zdot", n, zdot.len())?;
    Error::check_len("psi", n, psi.len())?;
    Error::check_len("gamma", n, gamma.len())?;
    Error::check_len("v", n, v.len())?;
    let mut out = DVector::zeros(3 * n);
    for t in 0..n {
        let (sp, cp) = psi[t].sin_cos();
        let (sg, cg) = gamma[t].sin_cos();
        out[t] = xdot[t] - v[t] * cp * cg;
        out[n + t] = ydot[t] - v[t] * sp * cg;
        out[2 * n + t] = zdot[t] + v[t] * sg;
    }
    Ok(out)
}

/// Stacked polar collision residuals. Layout: for obstacle `i`, three
/// consecutive blocks of `n` (x, y, z components); obstacles follow each other.
/// `alpha`, `beta`, `d` are `m x n`.
pub fn eval_collision_residual(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    alpha: &DMatrix<f64>,
    beta: &DMatrix<f64>,
    d: &DMatrix<f64>,
    obstacles: &[Ellipsoid],
) -> Result<DVector<f64>> {
    let n = x.len();
    let m = obstacles.len();
    Error::check_len("y", n, y.len())?;
    Error::check_len("z", n, z.len())?;
    for (what, mat) in [("alpha", alpha), ("beta", beta), ("d", d)] {
        Error::check_len(what, m, mat.nrows())?;
        Error::check_len(what, n, mat.ncols())?;
    }
    let mut out = DVector::zeros(3 * m * n);
    for (i, obs) in obstacles.iter().enumerate() {
        let base = 3 * n * i;
        for t in 0..n {
            let r = polar_offset(obs, alpha[(i, t)], beta[(i, t)], d[(i, t)]);
            out[base + t] = x[t] - obs.center.x - r.x;
            out[base + n + t] = y[t] - obs.center.y - r.y;
            out[base + 2 * n + t] = z[t] - obs.center.z - r.z;
        }
    }
    Ok(out)
}

/// Offset from the obstacle center described by the polar parameters.
pub fn polar_offset(obs: &Ellipsoid, alpha: f64, beta: f64, d: f64) -> Vector3<f64> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    Vector3::new(
        obs.semi_axes.x * d * sb * ca,
        obs.semi_axes.y * d * sb * sa,
        obs.semi_axes.z * d * cb,
    )
}

/// Validation margin on the avoidance left-hand side, sized for terminal
/// residuals around 1e-3.
pub const DEFAULT_AVOIDANCE_MARGIN: f64 = 1e-2;

/// Outcome of checking samples against the quadratic avoidance inequality.
#[derive(Debug, Clone)]
pub struct AvoidanceReport {
    /// `passes[i][t]` for obstacle `i`, sample `t`.
    pub passes: Vec<Vec<bool>>,
    /// Largest left-hand side over all pairs (`-inf` with no obstacles).
    pub worst: f64,
    pub margin: f64,
}

impl AvoidanceReport {
    pub fn all_pass(&self) -> bool {
        self.passes.iter().all(|row| row.iter().all(|&p| p))
    }
}

pub fn check_avoidance(
    x: &DVector<f64>,
    y: &DVector<f64>,
    z: &DVector<f64>,
    obstacles: &[Ellipsoid],
    margin: f64,
) -> AvoidanceReport {
    let mut worst = f64::NEG_INFINITY;
    let passes = obstacles
        .iter()
        .map(|obs| {
            (0..x.len())
                .map(|t| {
                    let lhs = obs.avoidance_lhs(&Vector3::new(x[t], y[t], z[t]));
                    worst = worst.max(lhs);
                    lhs <= margin
                })
                .collect()
        })
        .collect();
    AvoidanceReport {
        passes,
        worst,
        margin,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::FRAC_PI_2;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn inflation_adds_radius() {
        let raw = [Ellipsoid::new([0.0; 3], [1.0, 2.0, 3.0])];
        assert_eq!(inflate_obstacles(&raw, 0.0)[0].semi_axes, Vector3::new(1.0, 2.0, 3.0));
        assert_eq!(inflate_obstacles(&raw, 0.5)[0].semi_axes, Vector3::new(1.5, 2.5, 3.5));
        let grown = inflate_obstacles(&[Ellipsoid::sphere([1.0, 1.0, 1.0], 4.0)], 1.0);
        assert_abs_diff_eq!(grown[0].avoidance_lhs(&Vector3::new(6.0, 1.0, 1.0)), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn kinematic_residual_cases() {
        let n = 4;
        let ones = DVector::from_element(n, 1.0);
        let zeros = DVector::zeros(n);
        let r = eval_kinematic_residual(&(&ones * 5.0), &zeros, &zeros, &zeros, &zeros, &(&ones * 5.0))
            .unwrap();
        assert!(r.amax() == 0.0);
        let r = eval_kinematic_residual(&(&ones * 4.0), &zeros, &zeros, &zeros, &zeros, &(&ones * 5.0))
            .unwrap();
        for t in 0..n {
            assert_eq!(r[t], -1.0);
            assert_eq!(r[n + t], 0.0);
            assert_eq!(r[2 * n + t], 0.0);
        }

        let psi = v(&[0.3, -1.2, 2.9]);
        let gamma = v(&[0.1, -0.2, 0.05]);
        let speed = v(&[12.0, 15.0, 18.0]);
        let xd = DVector::from_fn(3, |t, _| speed[t] * psi[t].cos() * gamma[t].cos());
        let yd = DVector::from_fn(3, |t, _| speed[t] * psi[t].sin() * gamma[t].cos());
        let zd = DVector::from_fn(3, |t, _| -speed[t] * gamma[t].sin());
        let r = eval_kinematic_residual(&xd, &yd, &zd, &psi, &gamma, &speed).unwrap();
        assert!(r.amax() < 1e-13);
    }

    #[test]
    fn kinematic_residual_dimension_mismatch() {
        let a = DVector::zeros(3);
        let b = DVector::zeros(4);
        assert!(matches!(
            eval_kinematic_residual(&a, &a, &a, &a, &a, &b),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn kinematic_residual_yaw_invariant() {
        let xd = v(&[3.0, -2.0, 7.5]);
        let yd = v(&[1.0, 4.0, -0.5]);
        let zd = v(&[0.3, -0.1, 0.0]);
        let psi = v(&[0.2, 1.9, -0.4]);
        let gamma = v(&[0.05, -0.1, 0.2]);
        let speed = v(&[13.0, 14.0, 15.0]);
        let base = eval_kinematic_residual(&xd, &yd, &zd, &psi, &gamma, &speed).unwrap();
        let th: f64 = 0.77;
        let (s, c) = th.sin_cos();
        let xr = DVector::from_fn(3, |t, _| c * xd[t] - s * yd[t]);
        let yr = DVector::from_fn(3, |t, _| s * xd[t] + c * yd[t]);
        let pr = psi.add_scalar(th);
        let rot = eval_kinematic_residual(&xr, &yr, &zd, &pr, &gamma, &speed).unwrap();
        for t in 0..3 {
            // horizontal residual rotates, its norm and the vertical part do not change
            let nb = base[t].hypot(base[3 + t]);
            let nr = rot[t].hypot(rot[3 + t]);
            assert_abs_diff_eq!(nb, nr, epsilon = 1e-12);
            assert_abs_diff_eq!(base[6 + t], rot[6 + t], epsilon = 1e-12);
        }
    }

    #[test]
    fn collision_residual_cases() {
        let unit = [Ellipsoid::sphere([0.0; 3], 1.0)];
        let p = v(&[2.0]);
        let o = v(&[0.0]);
        let a = DMatrix::from_element(1, 1, 0.0);
        let b = DMatrix::from_element(1, 1, FRAC_PI_2);
        let r = eval_collision_residual(&p, &o, &o, &a, &b, &DMatrix::from_element(1, 1, 2.0), &unit).unwrap();
        assert!(r.amax() < 1e-15);
        let r = eval_collision_residual(&p, &o, &o, &a, &b, &DMatrix::from_element(1, 1, 1.0), &unit).unwrap();
        assert_abs_diff_eq!(r[0], 1.0, epsilon = 1e-15);
        assert!(r[1].abs() < 1e-15 && r[2].abs() < 1e-15);

        let obs = [Ellipsoid::new([3.0, -1.0, 2.0], [2.0, 5.0, 1.5])];
        let (al, be, d) = (0.7, 1.1, 1.8);
        let pt = obs[0].center + polar_offset(&obs[0], al, be, d);
        let r = eval_collision_residual(
            &v(&[pt.x]),
            &v(&[pt.y]),
            &v(&[pt.z]),
            &DMatrix::from_element(1, 1, al),
            &DMatrix::from_element(1, 1, be),
            &DMatrix::from_element(1, 1, d),
            &obs,
        )
        .unwrap();
        assert!(r.amax() < 1e-14);
    }

    #[test]
    fn avoidance_check_cases() {
        let obs = [Ellipsoid::sphere([0.0; 3], 2.0)];
        let rep = check_avoidance(&v(&[4.0]), &v(&[0.0]), &v(&[0.0]), &obs, 0.0);
        assert_abs_diff_eq!(rep.worst, -3.0);
        assert!(rep.all_pass());
        let rep = check_avoidance(&v(&[2.0]), &v(&[0.0]), &v(&[0.0]), &obs, 0.0);
        assert_abs_diff_eq!(rep.worst, 0.0);
        assert!(rep.all_pass());
        let rep = check_avoidance(&v(&[0.0]), &v(&[0.0]), &v(&[0.0]), &obs, 0.0);
        assert_abs_diff_eq!(rep.worst, 1.0);
        assert!(!rep.all_pass());
    }

    #[test]
    fn limits_validation_names_field() {
        let lim = Limits {
            v_min: 20.0,
            v_max: 20.0,
            ..Limits::default()
        };
        match lim.validate() {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "limits.v_min"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn start_inside_obstacle_rejected() {
        let mut spec = ProblemSpec::new(BoundaryState::at_rest([0.0; 3]), [100.0, 0.0, 0.0]);
        spec.obstacles.push(Ellipsoid::sphere([1.0, 0.0, 0.0], 3.0));
        assert!(matches!(spec.validate(), Err(Error::Validation { .. })));
    }
}
