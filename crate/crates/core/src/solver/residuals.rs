use nalgebra::Vector3;
use serde::Serialize;

use crate::basis::BasisSet;
use crate::model::{polar_offset, ProblemSpec};
use crate::solver::state::{Samples, SolverState};

/// Mean constraint residuals after one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualEntry {
    /// Mean over samples of the Euclidean norm of the kinematic residual (m/s).
    pub kinematic: f64,
    /// Mean over obstacle-sample pairs of the norm of the polar collision residual (m).
    pub collision: f64,
    /// Mean over samples of `max(0, |psidot| - g tan(phi_max) / v)` (rad/s).
    pub heading_rate: f64,
}

impl ResidualEntry {
    pub fn max(&self) -> f64 {
        self.kinematic.max(self.collision).max(self.heading_rate)
    }

    pub fn all_below(&self, tol: f64) -> bool {
        self.kinematic <= tol && self.collision <= tol && self.heading_rate <= tol
    }
}

/// Convergence trace, one entry per executed iteration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ResidualReport {
    pub mean_kinematic: Vec<f64>,
    pub mean_collision: Vec<f64>,
    pub mean_heading_rate_violation: Vec<f64>,
}

impl ResidualReport {
    pub fn push(&mut self, e: ResidualEntry) {
        self.mean_kinematic.push(e.kinematic);
        self.mean_collision.push(e.collision);
        self.mean_heading_rate_violation.push(e.heading_rate);
    }

    pub fn len(&self) -> usize {
        self.mean_kinematic.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mean_kinematic.is_empty()
    }

    pub fn get(&self, k: usize) -> Option<ResidualEntry> {
        Some(ResidualEntry {
            kinematic: *self.mean_kinematic.get(k)?,
            collision: *self.mean_collision.get(k)?,
            heading_rate: *self.mean_heading_rate_violation.get(k)?,
        })
    }

    pub fn last(&self) -> Option<ResidualEntry> {
        self.len().checked_sub(1).and_then(|k| self.get(k))
    }
}

pub fn compute_residuals(state: &SolverState, spec: &ProblemSpec, basis: &BasisSet) -> ResidualEntry {
    let s = Samples::of(state, basis);
    let n = basis.n();

    let mut kin = 0.0;
    let mut rate = 0.0;
    for t in 0..n {
        let (sp, cp) = s.psi[t].sin_cos();
        let (sg, cg) = state.gamma[t].sin_cos();
        let v = state.v[t];
        let r = Vector3::new(s.xdot[t] - v * cp * cg, s.ydot[t] - v * sp * cg, s.zdot[t] + v * sg);
        kin += r.norm();
        rate += (s.psidot[t].abs() - spec.limits.max_heading_rate(v)).max(0.0);
    }

    let mut coll = 0.0;
    for (i, obs) in spec.obstacles.iter().enumerate() {
        for t in 0..n {
            let off = polar_offset(obs, state.alpha[(i, t)], state.beta[(i, t)], state.d[(i, t)]);
            coll += (s.point(t) - obs.center - off).norm();
        }
    }
    let pairs = spec.n_obstacles() * n;

    ResidualEntry {
        kinematic: kin / n as f64,
        collision: if pairs == 0 { 0.0 } else { coll / pairs as f64 },
        heading_rate: rate / n as f64,
    }
}
