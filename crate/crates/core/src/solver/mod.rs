//! Alternating minimization of the augmented Lagrangian.
//!
//! One iteration updates, in order: the x, y and z coefficients (shared KKT
//! factorization), the heading coefficients, the flight-path angle, the
//! forward speed, the obstacle angles and the obstacle distances; then the
//! Bregman multipliers absorb the remaining kinematic and collision
//! residuals. The loop stops once all three mean residuals are below
//! tolerance or the iteration budget is spent.

pub mod heading;
pub mod kkt;
pub mod multipliers;
pub mod residuals;
pub mod state;
pub mod steps;
pub mod traversal;

use std::time::{Duration, Instant};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::basis::{build_basis, BasisSet};
use crate::error::{Error, Result};
use crate::model::{ProblemSpec, TotalTime};

pub use heading::step_heading;
pub use kkt::KktCache;
pub use multipliers::update_bregman_multipliers;
pub use residuals::{compute_residuals, ResidualEntry, ResidualReport};
pub use state::{initialize_state, Axis, Samples, SolverState};
pub use steps::{
    step_flight_path, step_obstacle_angles, step_obstacle_distance, step_position_axis,
    step_velocity,
};
pub use traversal::estimate_traversal_time;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum HeadingVariant {
    /// Heading-rate bound handled by slack + multiplier penalties.
    #[default]
    #[serde(alias = "admm")]
    UnconstrainedAdmm,
    /// Heading-rate bound enforced exactly in an inequality QP.
    #[serde(alias = "qp")]
    ConstrainedQp,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub max_iter: usize,
    pub residual_tol: f64,
    pub pre_iterations: usize,
    pub heading_variant: HeadingVariant,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            max_iter: 300,
            residual_tol: 1e-3,
            pre_iterations: 30,
            heading_variant: HeadingVariant::UnconstrainedAdmm,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iter < 1 {
            return Err(Error::validation("solver.max_iter", "must be at least 1"));
        }
        if !(self.residual_tol.is_finite() && self.residual_tol > 0.0) {
            return Err(Error::validation("solver.residual_tol", "must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIterReached,
}

/// Sampled result of a solve.
#[derive(Debug, Clone)]
pub struct TrajectorySolution {
    pub t: Vec<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub z: DVector<f64>,
    pub psi: DVector<f64>,
    pub psidot: DVector<f64>,
    pub gamma: DVector<f64>,
    pub v: DVector<f64>,
    pub state: SolverState,
    pub basis: BasisSet,
    pub residuals: ResidualReport,
    pub status: Status,
    pub iterations: usize,
    pub wall_time: Duration,
}

impl TrajectorySolution {
    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn total_time(&self) -> f64 {
        self.basis.total_time()
    }
}

/// Solver instance owning its state; steps may be driven one block at a time.
#[derive(Debug, Clone)]
pub struct Solver {
    spec: ProblemSpec,
    config: SolverConfig,
    basis: BasisSet,
    cache: KktCache,
    state: SolverState,
    report: ResidualReport,
}

impl Solver {
    /// Validates inputs, resolves an automatic horizon, builds the basis and
    /// the KKT factorizations, and initializes the state.
    pub fn new(spec: &ProblemSpec, config: &SolverConfig) -> Result<Self> {
        spec.validate()?;
        config.validate()?;
        let total_time = match spec.horizon.total_time {
            TotalTime::Fixed(t) => t,
            TotalTime::Auto => estimate_traversal_time(spec, config.pre_iterations)?,
        };
        let basis = build_basis(spec.horizon.n, spec.horizon.degree, total_time)?;
        Self::with_basis(spec, config, basis)
    }

    pub fn with_basis(spec: &ProblemSpec, config: &SolverConfig, basis: BasisSet) -> Result<Self> {
        let cache = KktCache::new(&basis, &spec.weights, spec.n_obstacles())?;
        let state = initialize_state(spec, &basis)?;
        Ok(Solver {
            spec: spec.clone(),
            config: *config,
            basis,
            cache,
            state,
            report: ResidualReport::default(),
        })
    }

    pub fn spec(&self) -> &ProblemSpec {
        &self.spec
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn basis(&self) -> &BasisSet {
        &self.basis
    }

    pub fn cache(&self) -> &KktCache {
        &self.cache
    }

    pub fn state(&self) -> &SolverState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut SolverState {
        &mut self.state
    }

    pub fn report(&self) -> &ResidualReport {
        &self.report
    }

    pub fn step_position(&mut self, axis: Axis) -> Result<()> {
        let c = step_position_axis(axis, &self.state, &self.spec, &self.basis, &self.cache)?;
        *self.state.coeffs_mut(axis) = c;
        Ok(())
    }

    pub fn step_heading(&mut self) -> Result<()> {
        step_heading(
            &mut self.state,
            &self.spec,
            &self.basis,
            &self.cache,
            self.config.heading_variant,
        )
    }

    pub fn step_flight_path(&mut self) {
        self.state.gamma = step_flight_path(&self.state, &self.spec, &self.basis);
    }

    pub fn step_velocity(&mut self) {
        self.state.v = step_velocity(&self.state, &self.spec, &self.basis);
    }

    pub fn step_obstacle_angles(&mut self) {
        let (alpha, beta) = step_obstacle_angles(&self.state, &self.spec, &self.basis);
        self.state.alpha = alpha;
        self.state.beta = beta;
    }

    pub fn step_obstacle_distance(&mut self) {
        self.state.d = step_obstacle_distance(&self.state, &self.spec, &self.basis);
    }

    pub fn update_multipliers(&mut self) -> Result<()> {
        update_bregman_multipliers(&mut self.state, &self.spec, &self.basis, &self.cache)
    }

    /// Runs one full iteration and records its residuals.
    pub fn iterate(&mut self) -> Result<ResidualEntry> {
        for axis in Axis::ALL {
            self.step_position(axis)?;
        }
        self.step_heading()?;
        self.step_flight_path();
        self.step_velocity();
        self.step_obstacle_angles();
        self.step_obstacle_distance();
        self.update_multipliers()?;
        self.state.iter += 1;

        if let Some(what) = self.state.first_non_finite() {
            return Err(Error::NonFinite {
                iteration: self.state.iter,
                what,
            });
        }
        let entry = compute_residuals(&self.state, &self.spec, &self.basis);
        if !(entry.kinematic.is_finite() && entry.collision.is_finite() && entry.heading_rate.is_finite()) {
            return Err(Error::NonFinite {
                iteration: self.state.iter,
                what: "residuals",
            });
        }
        self.report.push(entry);
        Ok(entry)
    }

    /// Iterates until convergence or `max_iter`, calling `observer` after
    /// every iteration.
    pub fn run_with<F>(mut self, mut observer: F) -> Result<TrajectorySolution>
    where
        F: FnMut(&Solver, &ResidualEntry),
    {
        let started = Instant::now();
        let mut status = Status::MaxIterReached;
        while self.state.iter < self.config.max_iter {
            let entry = self.iterate()?;
            observer(&self, &entry);
            if entry.all_below(self.config.residual_tol) {
                status = Status::Converged;
                break;
            }
        }
        let elapsed = started.elapsed();
        Ok(self.finish(status, elapsed))
    }

    pub fn run(self) -> Result<TrajectorySolution> {
        self.run_with(|_, _| {})
    }

    fn finish(self, status: Status, wall_time: Duration) -> TrajectorySolution {
        let s = Samples::of(&self.state, &self.basis);
        TrajectorySolution {
            t: self.basis.t_samples().to_vec(),
            x: s.x,
            y: s.y,
            z: s.z,
            psi: s.psi,
            psidot: s.psidot,
            gamma: self.state.gamma.clone(),
            v: self.state.v.clone(),
            iterations: self.state.iter,
            state: self.state,
            basis: self.basis,
            residuals: self.report,
            status,
            wall_time,
        }
    }
}

/// Solves one planning problem end to end. Reported wall time covers the
/// traversal-time heuristic, setup and the iterations.
pub fn solve(spec: &ProblemSpec, config: &SolverConfig) -> Result<TrajectorySolution> {
    let started = Instant::now();
    let solver = Solver::new(spec, config)?;
    let mut sol = solver.run()?;
    sol.wall_time = started.elapsed();
    Ok(sol)
}
