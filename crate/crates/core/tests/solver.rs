//! End-to-end solver behavior on synthetic problems and bundled scenarios.

use std::f64::consts::PI;
use std::path::PathBuf;

use approx::assert_relative_eq;
use nalgebra::{DMatrix, DVector, Rotation3, Vector3};

use fwtraj::basis::build_basis;
use fwtraj::model::{BoundaryState, Ellipsoid, ProblemSpec, TotalTime, Weights};
use fwtraj::qp::kkt_matrix;
use fwtraj::scenario::{load_scenario_file, Scenario};
use fwtraj::solver::steps::{position_rhs, speed_cap};
use fwtraj::solver::traversal::TIME_FLOOR_PER_SAMPLE;
use fwtraj::solver::{
    estimate_traversal_time, initialize_state, step_position_axis, update_bregman_multipliers, Axis,
    HeadingVariant, KktCache, Samples, Solver, SolverConfig,
};

fn scenario(rel: &str) -> Scenario {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(rel);
    load_scenario_file(path).expect("bundled scenario")
}

fn open_line(goal: [f64; 3]) -> ProblemSpec {
    ProblemSpec::new(BoundaryState::flying([0.0, 0.0, 0.0], 12.0, 0.0), goal)
}

#[test]
fn traversal_time_of_open_line_is_distance_over_min_speed() {
    let spec = open_line([120.0, 0.0, 0.0]);
    let t = estimate_traversal_time(&spec, 30).unwrap();
    assert_relative_eq!(t, 10.0, max_relative = 0.05);
}

#[test]
fn traversal_time_grows_around_a_blocking_sphere() {
    let open = open_line([120.0, 0.0, 0.0]);
    let mut blocked = open.clone();
    blocked.obstacles = vec![Ellipsoid::sphere([60.0, 1.0, 0.0], 15.0)];
    let t_open = estimate_traversal_time(&open, 30).unwrap();
    let t_blocked = estimate_traversal_time(&blocked, 30).unwrap();
    assert!(t_blocked > t_open, "{t_blocked} vs {t_open}");
}

#[test]
fn traversal_time_floor_when_start_is_goal() {
    let mut start = BoundaryState::at_rest([5.0, 5.0, 30.0]);
    start.heading = Some(0.0);
    let spec = ProblemSpec::new(start, [5.0, 5.0, 30.0]);
    let t = estimate_traversal_time(&spec, 30).unwrap();
    assert!(t > 0.0);
    assert!(t <= spec.horizon.n as f64 * TIME_FLOOR_PER_SAMPLE + 1e-12, "{t}");
}

#[test]
fn position_step_without_penalties_meets_boundary_rows_and_pulls_to_goal() {
    let mut spec = ProblemSpec::new(BoundaryState::at_rest([0.0, 0.0, 0.0]), [50.0, 0.0, 0.0]);
    spec.start.heading = Some(0.0);
    spec.weights = Weights {
        rho_nh: 0.0,
        rho_c: 0.0,
        ..Weights::default()
    };
    let basis = build_basis(40, 10, 8.0).unwrap();
    let cache = KktCache::new(&basis, &spec.weights, 0).unwrap();
    let state = initialize_state(&spec, &basis).unwrap();
    let c = step_position_axis(Axis::X, &state, &spec, &basis, &cache).unwrap();
    assert!((basis.p().row(0) * &c)[0].abs() < 1e-9);
    assert!((basis.pdot().row(0) * &c)[0].abs() < 1e-9);
    assert!((basis.pddot().row(0) * &c)[0].abs() < 1e-9);
    let end = (basis.p().row(basis.n() - 1) * &c)[0];
    assert!(end > 0.0 && end <= 50.0, "{end}");
}

/// Urban scenario after one full iteration, ready for a fresh position step.
fn urban_after_one_iteration() -> Solver {
    let sc = scenario("urban/urban-01.toml");
    let mut solver = Solver::new(&sc.spec, &sc.config).unwrap();
    solver.iterate().unwrap();
    solver
}

#[test]
fn position_step_matches_dense_solve_with_different_factorization() {
    let solver = urban_after_one_iteration();
    let (state, spec, basis, cache) = (solver.state(), solver.spec(), solver.basis(), solver.cache());
    let kkt = kkt_matrix(&cache.q_position, &cache.a_eq_position);
    let k = basis.n_coeffs();
    for axis in Axis::ALL {
        let a = axis.index();
        let got = step_position_axis(axis, state, spec, basis, cache).unwrap();
        let mut full = DVector::zeros(k + 3);
        full.rows_mut(0, k).copy_from(&position_rhs(axis, state, spec, basis, cache));
        full[k] = spec.start.position[a];
        full[k + 1] = spec.start.velocity[a];
        full[k + 2] = spec.start.acceleration[a];
        let oracle = kkt.clone().qr().solve(&full).unwrap();
        let err = (&got - oracle.rows(0, k)).amax();
        assert!(err <= 1e-8, "{}: {err:e}", axis.name());
    }
}

/// Axis objective assembled sample by sample, independently of the KKT cache.
fn axis_objective(solver: &Solver, axis: Axis, c: &DVector<f64>) -> f64 {
    let (state, spec, basis) = (solver.state(), solver.spec(), solver.basis());
    let w = &spec.weights;
    let a = axis.index();
    let n = basis.n();
    let pos = basis.p() * c;
    let vel = basis.pdot() * c;
    let acc = basis.pddot() * c;
    let psi = basis.p() * &state.c_psi;
    let mut f = 0.5 * w.w_smooth * acc.norm_squared() + 0.5 * w.w_goal * (pos[n - 1] - spec.goal[a]).powi(2);
    for t in 0..n {
        let (v, g, p) = (state.v[t], state.gamma[t], psi[t]);
        let target = [v * p.cos() * g.cos(), v * p.sin() * g.cos(), -v * g.sin()][a];
        f += 0.5 * w.rho_nh * (vel[t] - target).powi(2);
        for (i, obs) in spec.obstacles.iter().enumerate() {
            let (al, be, d) = (state.alpha[(i, t)], state.beta[(i, t)], state.d[(i, t)]);
            let dir = [be.sin() * al.cos(), be.sin() * al.sin(), be.cos()][a];
            f += 0.5 * w.rho_c * (pos[t] - obs.center[a] - obs.semi_axes[a] * d * dir).powi(2);
        }
    }
    f - state.multiplier(axis).dot(c)
}

#[test]
fn position_step_is_stationary_on_the_constraint_null_space() {
    let solver = urban_after_one_iteration();
    let (state, spec, basis, cache) = (solver.state(), solver.spec(), solver.basis(), solver.cache());
    let k = basis.n_coeffs();
    // Projector onto the null space of the boundary rows.
    let u = cache.a_eq_position.transpose().svd(true, false).u.unwrap();
    let projector = DMatrix::identity(k, k) - &u * u.transpose();
    for axis in Axis::ALL {
        let c = step_position_axis(axis, state, spec, basis, cache).unwrap();
        let h = 1e-3;
        let grad = DVector::from_fn(k, |j, _| {
            let mut plus = c.clone();
            let mut minus = c.clone();
            plus[j] += h;
            minus[j] -= h;
            (axis_objective(&solver, axis, &plus) - axis_objective(&solver, axis, &minus)) / (2.0 * h)
        });
        let projected = &projector * grad;
        assert!(projected.norm() <= 1e-6, "{}: {:e}", axis.name(), projected.norm());
    }
}

#[test]
fn straight_east_flight_keeps_zero_heading() {
    let spec = ProblemSpec::new(BoundaryState::flying([0.0, 0.0, 30.0], 14.0, 0.0), [200.0, 0.0, 30.0]);
    let mut solver = Solver::new(&spec, &SolverConfig::default()).unwrap();
    for axis in Axis::ALL {
        solver.step_position(axis).unwrap();
    }
    solver.step_heading().unwrap();
    let psi = solver.basis().p() * &solver.state().c_psi;
    assert!(psi.amax() < 1e-6, "{}", psi.amax());
    assert!(solver.state().lambda_in.iter().all(|&l| l == 0.0));
}

#[test]
fn multiplier_update_from_zero_is_the_residual_formula() {
    let mut solver = urban_after_one_iteration();
    for axis in Axis::ALL {
        solver.step_position(axis).unwrap();
    }
    solver.step_heading().unwrap();
    solver.step_flight_path();
    solver.step_velocity();
    solver.step_obstacle_angles();
    solver.step_obstacle_distance();

    let (spec, basis, cache) = (solver.spec().clone(), solver.basis().clone(), solver.cache().clone());
    let mut state = solver.state().clone();
    for lam in [&mut state.lambda_x, &mut state.lambda_y, &mut state.lambda_z, &mut state.lambda_psi] {
        lam.fill(0.0);
    }
    let before = state.clone();
    update_bregman_multipliers(&mut state, &spec, &basis, &cache).unwrap();

    let w = &spec.weights;
    let s = Samples::of(&before, &basis);
    let n = basis.n();
    for (axis, lam) in [(Axis::X, &state.lambda_x), (Axis::Y, &state.lambda_y), (Axis::Z, &state.lambda_z)] {
        let a = axis.index();
        let (pos, vel) = [(&s.x, &s.xdot), (&s.y, &s.ydot), (&s.z, &s.zdot)][a];
        let mut expected = DVector::zeros(basis.n_coeffs());
        for t in 0..n {
            let (v, g, p) = (before.v[t], before.gamma[t], s.psi[t]);
            let target = [v * p.cos() * g.cos(), v * p.sin() * g.cos(), -v * g.sin()][a];
            expected -= w.rho_nh * (vel[t] - target) * basis.pdot().row(t).transpose();
            for (i, obs) in spec.obstacles.iter().enumerate() {
                let (al, be, d) = (before.alpha[(i, t)], before.beta[(i, t)], before.d[(i, t)]);
                let dir = [be.sin() * al.cos(), be.sin() * al.sin(), be.cos()][a];
                let r = pos[t] - obs.center[a] - obs.semi_axes[a] * d * dir;
                expected -= w.rho_c * r * basis.p().row(t).transpose();
            }
        }
        let scale = expected.amax().max(1.0);
        assert!((lam - &expected).amax() <= 1e-10 * scale, "{}", axis.name());
    }

    // Heading: unwrapped bearing of the horizontal velocity as the target.
    let psi0 = spec.start.heading.unwrap_or(0.0);
    let mut theta: Vec<f64> = (0..n).map(|t| s.ydot[t].atan2(s.xdot[t])).collect();
    theta[0] += 2.0 * PI * ((psi0 - theta[0]) / (2.0 * PI)).round();
    for t in 1..n {
        theta[t] += 2.0 * PI * ((theta[t - 1] - theta[t]) / (2.0 * PI)).round();
    }
    let r = &s.psi - DVector::from_vec(theta);
    let expected = -w.rho_nh * (basis.p().transpose() * r);
    assert!((&state.lambda_psi - &expected).amax() <= 1e-10 * expected.amax().max(1.0));
}

fn rotate_spec(spec: &ProblemSpec, angle: f64) -> ProblemSpec {
    let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), angle);
    let about = spec.start.position;
    let turn = |p: Vector3<f64>| about + rot * (p - about);
    let mut out = spec.clone();
    out.goal = turn(spec.goal);
    out.start.velocity = rot * spec.start.velocity;
    out.start.acceleration = rot * spec.start.acceleration;
    out.start.heading = spec.start.heading.map(|h| h + angle);
    out.obstacles = spec
        .obstacles
        .iter()
        .map(|o| Ellipsoid::sphere(turn(o.center).into(), o.semi_axes.x))
        .collect();
    out
}

#[test]
fn solution_is_equivariant_under_yaw_rotation() {
    let mut spec = ProblemSpec::new(BoundaryState::flying([0.0, 0.0, 30.0], 14.0, 0.2), [180.0, 30.0, 35.0]);
    spec.obstacles = vec![
        Ellipsoid::sphere([70.0, 5.0, 30.0], 14.0),
        Ellipsoid::sphere([130.0, 40.0, 25.0], 12.0),
    ];
    let config = SolverConfig::default();
    let base = Solver::new(&spec, &config).unwrap().run().unwrap();
    for angle in [0.7, -2.1] {
        let rotated_spec = rotate_spec(&spec, angle);
        let rotated = Solver::new(&rotated_spec, &config).unwrap().run().unwrap();
        assert_eq!(rotated.iterations, base.iterations);
        let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), angle);
        for t in 0..base.x.len() {
            let expect = rot * Vector3::new(base.x[t], base.y[t], base.z[t]);
            let got = Vector3::new(rotated.x[t], rotated.y[t], rotated.z[t]);
            assert!((got - expect).norm() <= 1e-4, "angle {angle} sample {t}: {}", (got - expect).norm());
        }
    }
}

#[test]
fn open_field_converges_close_to_goal() {
    let sc = scenario("open-field.toml");
    for n in [50, 100] {
        let mut spec = sc.spec.clone();
        spec.horizon.n = n;
        let sol = Solver::new(&spec, &sc.config).unwrap().run().unwrap();
        assert!(sol.converged() && sol.iterations < 300, "n={n}: {:?}", sol.status);
        assert!(sol.residuals.last().unwrap().kinematic <= 1e-3);
        let k = sol.x.len() - 1;
        let miss = (Vector3::new(sol.x[k], sol.y[k], sol.z[k]) - spec.goal).norm();
        assert!(miss <= 2.0, "n={n}: {miss}");
    }
}

fn tight_turn_files() -> Vec<PathBuf> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios/tight-turn");
    fwtraj::report::scenario_files(&dir).unwrap()
}

#[test]
fn tight_turns_respect_heading_rate_bound_after_convergence() {
    for path in tight_turn_files() {
        let sc = load_scenario_file(&path).unwrap();
        for variant in [HeadingVariant::UnconstrainedAdmm, HeadingVariant::ConstrainedQp] {
            let config = SolverConfig {
                heading_variant: variant,
                ..sc.config
            };
            let sol = Solver::new(&sc.spec, &config).unwrap().run().unwrap();
            assert!(sol.converged(), "{} {variant:?}", sc.id);
            let lim = &sc.spec.limits;
            let mut active = false;
            for t in 0..sol.v.len() {
                let cap = lim.max_heading_rate(sol.v[t]);
                assert!(sol.psidot[t].abs() <= cap + 1e-3, "{} {variant:?} t={t}", sc.id);
                active |= sol.psidot[t].abs() >= 0.95 * cap;
            }
            assert!(active, "{}: bound never approached", sc.id);
        }
    }
}

#[test]
fn state_ranges_hold_after_every_iteration() {
    let sc = scenario("urban/urban-05.toml");
    let lim = sc.spec.limits;
    let mut checked = 0;
    Solver::new(&sc.spec, &sc.config)
        .unwrap()
        .run_with(|solver, _| {
            let st = solver.state();
            let psidot = solver.basis().pdot() * &st.c_psi;
            assert!(st.d.iter().all(|&d| d >= 1.0));
            assert!(st.beta.iter().all(|&b| (0.0..=PI).contains(&b)));
            assert!(st.gamma.iter().all(|&g| g.abs() <= lim.gamma_max));
            for t in 0..st.v.len() {
                assert!(st.v[t] >= lim.v_min);
                assert!(st.v[t] <= speed_cap(psidot[t], &lim).max(lim.v_min));
            }
            checked += 1;
        })
        .unwrap();
    assert!(checked > 0);
}

#[test]
fn multiplier_updates_settle_on_a_converged_run() {
    let sc = scenario("tight-turn/turn-01.toml");
    let stack = |s: &fwtraj::solver::SolverState| {
        let parts = [&s.lambda_x, &s.lambda_y, &s.lambda_z, &s.lambda_psi];
        DVector::from_iterator(parts.iter().map(|p| p.len()).sum(), parts.iter().flat_map(|p| p.iter().copied()))
    };
    let mut history = Vec::new();
    let sol = Solver::new(&sc.spec, &sc.config)
        .unwrap()
        .run_with(|solver, _| history.push(stack(solver.state())))
        .unwrap();
    assert!(sol.converged());
    assert!(history.len() > 11);
    let last = history.last().unwrap();
    for w in history[history.len() - 11..].windows(2) {
        let step = (&w[1] - &w[0]).norm();
        assert!(step < 1e-2 * last.norm(), "{step:e} vs {:e}", last.norm());
    }
}

#[test]
fn fixed_horizon_is_used_verbatim() {
    let mut spec = open_line([150.0, 0.0, 0.0]);
    spec.horizon.total_time = TotalTime::Fixed(11.5);
    let solver = Solver::new(&spec, &SolverConfig::default()).unwrap();
    assert_eq!(solver.basis().total_time(), 11.5);
}
