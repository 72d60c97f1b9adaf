//! Command-line front end.
//!
//! Flag values take precedence over the scenario file, which takes
//! precedence over built-in defaults.
//!
//! Exit codes: 0 converged (or batch finished), 2 iteration budget spent,
//! 3 input error, 4 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use fwtraj::report::{exit_code, run_batch, run_scenario, Overrides, METRIC_NAMES};
use fwtraj::scenario::load_scenario_file;
use fwtraj::solver::{HeadingVariant, Status};

#[derive(Parser)]
#[command(name = "fwtraj", version, about = "Fixed-wing trajectory optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum VariantArg {
    /// Slack variables and multipliers (default).
    Admm,
    /// Exact inequality-constrained QP.
    Qp,
}

impl From<VariantArg> for HeadingVariant {
    fn from(v: VariantArg) -> Self {
        match v {
            VariantArg::Admm => HeadingVariant::UnconstrainedAdmm,
            VariantArg::Qp => HeadingVariant::ConstrainedQp,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Solve one scenario file and write trajectory, convergence and summary files.
    Solve {
        scenario: PathBuf,
        /// Number of planning samples.
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        /// Residual tolerance for termination.
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        heading_variant: Option<VariantArg>,
    },
    /// Run every scenario in a directory at each sample count and aggregate metrics.
    Bench {
        dir: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "50,100")]
        steps: Vec<usize>,
        #[arg(long)]
        max_iter: Option<usize>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long, default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, value_enum)]
        heading_variant: Option<VariantArg>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let code = match Cli::parse().command {
        Command::Solve {
            scenario,
            steps,
            max_iter,
            tol,
            out,
            heading_variant,
        } => solve(
            scenario,
            Overrides {
                steps,
                max_iter,
                residual_tol: tol,
                heading_variant: heading_variant.map(Into::into),
            },
            out,
        ),
        Command::Bench {
            dir,
            steps,
            max_iter,
            tol,
            out,
            heading_variant,
        } => bench(
            dir,
            &steps,
            Overrides {
                steps: None,
                max_iter,
                residual_tol: tol,
                heading_variant: heading_variant.map(Into::into),
            },
            out,
        ),
    };
    ExitCode::from(code)
}

fn solve(path: PathBuf, overrides: Overrides, out: PathBuf) -> u8 {
    let mut scenario = match load_scenario_file(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    overrides.apply(&mut scenario);
    match run_scenario(&scenario.id, &scenario.spec, &scenario.config, &out) {
        Ok(report) => {
            let s = &report.summary;
            let m = &s.metrics;
            println!(
                "{} n={} {:?} iterations={} final_residual={:.3} m wall={:.3} s",
                s.id, s.n, s.status, m.iterations, m.final_position_residual, m.wall_time
            );
            if let Some(r) = s.final_residuals {
                println!(
                    "residuals kinematic={:.2e} collision={:.2e} heading_rate={:.2e}",
                    r.kinematic, r.collision, r.heading_rate
                );
            }
            if !s.avoidance.passed {
                eprintln!("warning: avoidance check failed (worst lhs {:?})", s.avoidance.worst_lhs);
            }
            match s.status {
                Status::Converged => 0,
                Status::MaxIterReached => 2,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e) as u8
        }
    }
}

fn bench(dir: PathBuf, steps: &[usize], overrides: Overrides, out: PathBuf) -> u8 {
    if steps.is_empty() || steps.contains(&0) {
        eprintln!("error: --steps needs positive sample counts");
        return 3;
    }
    let summary = match run_batch(&dir, steps, &overrides, Some(&out)) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return 3;
        }
    };
    for agg in &summary.aggregates {
        println!(
            "n={}: runs={} converged={} avoidance_passed={} failed={}",
            agg.n, agg.runs, agg.converged, agg.avoidance_passed, agg.failed
        );
        for name in METRIC_NAMES {
            if let Some(s) = agg.metrics.get(name) {
                println!("  {name:<24} median={:<12.4} min={:<12.4} max={:.4}", s.median, s.min, s.max);
            }
        }
    }
    0
}
