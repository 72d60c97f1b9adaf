//! Run orchestration and result files.
//!
//! A single run writes three files into its output directory:
//!
//! * `trajectory.csv`: `t,x,y,z,psi,gamma,v,v_dot,gamma_dot,phi,phi_dot,psi_dot`, one row per sample;
//! * `convergence.csv`: `iter,r_kinematic,r_collision,r_heading_rate`, one row per iteration;
//! * `summary.json`: status, metrics, final residuals and the avoidance check.
//!
//! A batch runs every `*.toml` scenario of a directory at each requested
//! sample count, writes each run to `<out>/<id>/n<N>/`, and adds
//! `batch_summary.json` plus `aggregate.csv` (median/min/max of every metric
//! per sample count). Runs execute one after another so that timings are
//! not disturbed by sibling runs.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{check_avoidance, ProblemSpec, DEFAULT_AVOIDANCE_MARGIN};
use crate::postprocess::{compute_metrics, recover_controls, SolutionMetrics};
use crate::scenario::{load_scenario_file, Scenario};
use crate::solver::{HeadingVariant, ResidualEntry, ResidualReport, Solver, SolverConfig, Status};

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const CONVERGENCE_FILE: &str = "convergence.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const BATCH_SUMMARY_FILE: &str = "batch_summary.json";
pub const AGGREGATE_FILE: &str = "aggregate.csv";

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
    pub gamma: f64,
    pub v: f64,
    pub v_dot: f64,
    pub gamma_dot: f64,
    pub phi: f64,
    pub phi_dot: f64,
    pub psi_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
struct ConvergenceRow {
    iter: usize,
    r_kinematic: f64,
    r_collision: f64,
    r_heading_rate: f64,
}

/// Avoidance check of the final samples at [`DEFAULT_AVOIDANCE_MARGIN`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AvoidanceSummary {
    pub margin: f64,
    pub passed: bool,
    /// Largest left-hand side over all obstacle-sample pairs; absent without obstacles.
    pub worst_lhs: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub id: String,
    pub n: usize,
    pub status: Status,
    pub total_time: f64,
    pub metrics: SolutionMetrics,
    pub final_residuals: Option<ResidualEntry>,
    pub avoidance: AvoidanceSummary,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: RunSummary,
    pub residuals: ResidualReport,
    pub trajectory: Vec<TrajectoryRow>,
}

impl RunReport {
    pub fn id(&self) -> &str {
        &self.summary.id
    }

    pub fn metrics(&self) -> &SolutionMetrics {
        &self.summary.metrics
    }

    pub fn converged(&self) -> bool {
        self.summary.status == Status::Converged
    }
}

/// Solves `spec`, recovers controls and writes the run files into `output_dir`.
pub fn run_scenario(id: &str, spec: &ProblemSpec, config: &SolverConfig, output_dir: &Path) -> Result<RunReport> {
    let report = execute(id, spec, config)?;
    write_run(&report, output_dir)?;
    Ok(report)
}

/// Solves and post-processes without touching the file system.
pub fn execute(id: &str, spec: &ProblemSpec, config: &SolverConfig) -> Result<RunReport> {
    let started = Instant::now();
    let solution = Solver::new(spec, config)?.run()?;
    let wall_time = started.elapsed();

    let controls = recover_controls(&solution.state, &solution.basis, &spec.limits);
    let metrics = compute_metrics(&solution, &controls, spec, wall_time);
    let check = check_avoidance(&solution.x, &solution.y, &solution.z, &spec.obstacles, DEFAULT_AVOIDANCE_MARGIN);

    let trajectory = (0..solution.t.len())
        .map(|k| TrajectoryRow {
            t: solution.t[k],
            x: solution.x[k],
            y: solution.y[k],
            z: solution.z[k],
            psi: solution.psi[k],
            gamma: solution.gamma[k],
            v: solution.v[k],
            v_dot: controls.v_dot[k],
            gamma_dot: controls.gamma_dot[k],
            phi: controls.phi[k],
            phi_dot: controls.phi_dot[k],
            psi_dot: controls.psi_dot[k],
        })
        .collect();

    Ok(RunReport {
        summary: RunSummary {
            id: id.to_string(),
            n: spec.horizon.n,
            status: solution.status,
            total_time: solution.total_time(),
            metrics,
            final_residuals: solution.residuals.last(),
            avoidance: AvoidanceSummary {
                margin: check.margin,
                passed: check.all_pass(),
                worst_lhs: check.worst.is_finite().then_some(check.worst),
            },
        },
        residuals: solution.residuals,
        trajectory,
    })
}

pub fn write_run(report: &RunReport, output_dir: &Path) -> Result<()> {
    fs::create_dir_all(output_dir)?;

    let mut w = csv::Writer::from_path(output_dir.join(TRAJECTORY_FILE))?;
    for row in &report.trajectory {
        w.serialize(row)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(output_dir.join(CONVERGENCE_FILE))?;
    for k in 0..report.residuals.len() {
        let e = report.residuals.get(k).expect("index below len");
        w.serialize(ConvergenceRow {
            iter: k + 1,
            r_kinematic: e.kinematic,
            r_collision: e.collision,
            r_heading_rate: e.heading_rate,
        })?;
    }
    w.flush()?;

    write_json(&output_dir.join(SUMMARY_FILE), &report.summary)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

/// Command-line values that take precedence over scenario-file settings.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub steps: Option<usize>,
    pub max_iter: Option<usize>,
    pub residual_tol: Option<f64>,
    pub heading_variant: Option<HeadingVariant>,
}

impl Overrides {
    pub fn apply(&self, scenario: &mut Scenario) {
        if let Some(n) = self.steps {
            scenario.spec.horizon.n = n;
        }
        if let Some(k) = self.max_iter {
            scenario.config.max_iter = k;
        }
        if let Some(tol) = self.residual_tol {
            scenario.config.residual_tol = tol;
        }
        if let Some(v) = self.heading_variant {
            scenario.config.heading_variant = v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Stat {
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Stat {
    /// `None` for an empty sample. The median of an even count averages the
    /// two middle values.
    pub fn of(values: &[f64]) -> Option<Stat> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let m = v.len() / 2;
        let median = if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) };
        Some(Stat {
            median,
            min: v[0],
            max: v[v.len() - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchRun {
    pub id: String,
    pub n: usize,
    pub summary: Option<RunSummary>,
    pub error: Option<String>,
}

/// Statistics over the successful runs at one sample count.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n: usize,
    pub runs: usize,
    pub failed: usize,
    pub converged: usize,
    pub avoidance_passed: usize,
    pub metrics: BTreeMap<String, Stat>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct BatchSummary {
    pub runs: Vec<BatchRun>,
    pub aggregates: Vec<Aggregate>,
}

impl BatchSummary {
    pub fn aggregate(&self, n: usize) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.n == n)
    }
}

/// Metric columns in aggregate order.
pub const METRIC_NAMES: [&str; 8] = [
    "gamma_dot_norm",
    "phi_dot_norm",
    "v_dot_norm",
    "final_position_residual",
    "arc_length",
    "wall_time",
    "iterations",
    "converged",
];

pub fn metric_values(m: &SolutionMetrics) -> [f64; 8] {
    [
        m.gamma_dot_norm,
        m.phi_dot_norm,
        m.v_dot_norm,
        m.final_position_residual,
        m.arc_length,
        m.wall_time,
        m.iterations as f64,
        if m.converged { 1.0 } else { 0.0 },
    ]
}

/// Scenario files (`*.toml`) of a directory in lexical order.
pub fn scenario_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|e| e == "toml") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

/// Runs every scenario in `scenario_dir` at every sample count in `steps`.
///
/// A scenario that fails to load or solve is recorded with its error and the
/// batch moves on. `overrides.steps` is ignored; `steps` decides.
pub fn run_batch(
    scenario_dir: &Path,
    steps: &[usize],
    overrides: &Overrides,
    output_dir: Option<&Path>,
) -> Result<BatchSummary> {
    let files = scenario_files(scenario_dir)?;
    if files.is_empty() {
        log::warn!("no scenario files in {}", scenario_dir.display());
    }

    let mut runs = Vec::new();
    for path in &files {
        let loaded = load_scenario_file(path);
        for &n in steps {
            let fallback_id = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let (id, outcome) = match &loaded {
                Err(e) => (fallback_id, Err(e.to_string())),
                Ok(sc) => {
                    let mut sc = sc.clone();
                    Overrides { steps: Some(n), ..*overrides }.apply(&mut sc);
                    let outcome = match output_dir {
                        Some(out) => run_scenario(&sc.id, &sc.spec, &sc.config, &out.join(&sc.id).join(format!("n{n}"))),
                        None => execute(&sc.id, &sc.spec, &sc.config),
                    };
                    (sc.id, outcome.map(|r| r.summary).map_err(|e| e.to_string()))
                }
            };
            match &outcome {
                Ok(s) => log::info!("{id} n={n}: {:?} after {} iterations", s.status, s.metrics.iterations),
                Err(e) => log::warn!("{id} n={n}: {e}"),
            }
            let (summary, error) = match outcome {
                Ok(s) => (Some(s), None),
                Err(e) => (None, Some(e)),
            };
            runs.push(BatchRun { id, n, summary, error });
        }
    }

    let aggregates = steps.iter().map(|&n| aggregate(&runs, n)).collect();
    let summary = BatchSummary { runs, aggregates };
    if let Some(out) = output_dir {
        write_batch(&summary, out)?;
    }
    Ok(summary)
}

fn aggregate(runs: &[BatchRun], n: usize) -> Aggregate {
    let at_n: Vec<&BatchRun> = runs.iter().filter(|r| r.n == n).collect();
    let ok: Vec<&RunSummary> = at_n.iter().filter_map(|r| r.summary.as_ref()).collect();
    let mut metrics = BTreeMap::new();
    for (k, name) in METRIC_NAMES.iter().enumerate() {
        let values: Vec<f64> = ok.iter().map(|s| metric_values(&s.metrics)[k]).collect();
        if let Some(stat) = Stat::of(&values) {
            metrics.insert(name.to_string(), stat);
        }
    }
    Aggregate {
        n,
        runs: at_n.len(),
        failed: at_n.len() - ok.len(),
        converged: ok.iter().filter(|s| s.status == Status::Converged).count(),
        avoidance_passed: ok.iter().filter(|s| s.avoidance.passed).count(),
        metrics,
    }
}

fn write_batch(summary: &BatchSummary, output_dir: &Path) -> Result<()> {
    fs::create_dir_all(output_dir)?;
    write_json(&output_dir.join(BATCH_SUMMARY_FILE), summary)?;

    let mut w = csv::Writer::from_path(output_dir.join(AGGREGATE_FILE))?;
    w.write_record(["n", "metric", "median", "min", "max"])?;
    for agg in &summary.aggregates {
        for name in METRIC_NAMES {
            if let Some(s) = agg.metrics.get(name) {
                w.write_record([
                    agg.n.to_string(),
                    name.to_string(),
                    s.median.to_string(),
                    s.min.to_string(),
                    s.max.to_string(),
                ])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Maps a library error onto the documented process exit codes.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::NonFinite { .. } | Error::SingularKkt(_) | Error::Infeasible(_) => 4,
        _ => 3,
    }
}
