use totc::inner::{bang_bang_violations, delta, gradient_from_adjoint, solve_inner, value_function_sweep};
use totc::outer::{delta_derivative, find_optimal_time, first_feasible_time, growth_check};
use totc::transform::{extend_right, sup_distance_extended, to_physical};
use totc::{DataFunction, Discretization, Error, InnerOptions, OuterOptions, ProblemSpec};

fn example(n_div: usize, m: usize) -> (Discretization, ProblemSpec) {
    (Discretization::uniform(n_div, m).unwrap(), ProblemSpec::paper_example())
}

#[test]
fn descending_branch_optimum_is_the_lower_vertex() {
    let (disc, spec) = example(8, 10);
    let r = solve_inner(0.1, &spec, &disc, &InnerOptions::default()).unwrap();
    assert!(r.converged);
    assert!(r.delta > 0.0);
    let grad = gradient_from_adjoint(&r, &disc);
    // corners coupled to no interior node have zero gradient and keep their start value
    let active = grad.as_slice().iter().zip(r.v_opt.as_slice()).filter(|(g, _)| g.abs() > 0.0);
    assert!(active.clone().count() > disc.n_nodes() * disc.n_steps() / 2);
    assert!(active.clone().all(|(_, &v)| v == spec.a));
    assert_eq!(bang_bang_violations(&r.v_opt, &grad, &spec, 1e-8), 0);
}

#[test]
fn inner_objective_never_increases() {
    let (disc, spec) = example(6, 8);
    for t in [0.05, 0.17, 0.3] {
        let r = solve_inner(t, &spec, &disc, &InnerOptions::default()).unwrap();
        for w in r.objective_history.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "T={t}: {:?}", r.objective_history);
        }
        assert!(r.v_opt.as_slice().iter().all(|&v| (spec.a..=spec.b).contains(&v)));
    }
}

#[test]
fn value_function_endpoints_on_a_coarse_grid() {
    let (disc, spec) = example(16, 40);
    let opts = InnerOptions::default();
    assert!((delta(0.002, &spec, &disc, &opts).unwrap() - 3.2425).abs() < 5e-2);
    let plateau = solve_inner(0.4, &spec, &disc, &opts).unwrap();
    assert!(plateau.converged);
    assert!((plateau.delta + spec.lambda).abs() < 1e-3);
}

#[test]
fn sweep_is_ordered_and_non_increasing() {
    let (disc, spec) = example(8, 16);
    let sweep = value_function_sweep(&spec, &disc, &InnerOptions::default(), 0.01, 0.4, 12).unwrap();
    assert_eq!(sweep.len(), 12);
    assert_eq!(sweep[0].horizon, 0.01);
    assert_eq!(sweep[11].horizon, 0.4);
    for w in sweep.windows(2) {
        assert!(w[0].horizon < w[1].horizon && w[1].delta <= w[0].delta + 1e-3);
    }
    // just past the optimal time the distance is nearly zero and the gap decays
    // sublinearly, so only points away from that kink must certify
    for p in &sweep {
        assert!(p.delta >= -spec.lambda);
        assert!(p.converged || p.delta < -spec.lambda + 1e-2, "{p:?}");
    }
    assert!(sweep.iter().filter(|p| p.converged).count() >= 10);
    assert!(value_function_sweep(&spec, &disc, &InnerOptions::default(), 0.4, 0.1, 5).is_err());
}

#[test]
fn value_function_derivative_matches_finite_differences() {
    let (disc, spec) = example(8, 20);
    let opts = InnerOptions::default();
    for t in [0.05, 0.1, 0.14] {
        let r = solve_inner(t, &spec, &disc, &opts).unwrap();
        let analytic = delta_derivative(&r, &disc, &spec).unwrap();
        let h = 1e-5;
        let fd = (delta(t + h, &spec, &disc, &opts).unwrap() - delta(t - h, &spec, &disc, &opts).unwrap()) / (2.0 * h);
        assert!(analytic < 0.0);
        assert!((analytic - fd).abs() / fd.abs() < 1e-3, "T={t}: {analytic} vs {fd}");
    }
}

#[test]
fn root_satisfies_first_order_system() {
    let (disc, spec) = example(12, 30);
    let opts = OuterOptions::default();
    let report = find_optimal_time(&spec, &disc, &opts, &InnerOptions::default()).unwrap();
    assert!(report.inner.delta.abs() <= opts.tol_t);
    assert!(report.newton_steps <= 10);
    let k = &report.kkt;
    assert!(k.mu > 0.0);
    assert!(k.residual_adjoint < 1e-8);
    assert!(k.residual_v < 1e-10);
    assert!(k.residual_t < 1e-8);
    assert!(k.residual_complementarity <= 2.0 * opts.tol_t * spec.lambda);
    assert_eq!(k.sign_violations, 0);
    // the root is where the optimal control first reaches the ball
    let tf = first_feasible_time(&report.inner.v_opt, &spec, &disc, 1.0, 1e-12).unwrap().unwrap();
    assert!((tf - report.t_opt).abs() < 1e-6);
}

#[test]
fn outer_errors() {
    let (disc, spec) = example(6, 10);
    let inner = InnerOptions::default();
    let bad = OuterOptions { t_init: 0.0, ..OuterOptions::default() };
    assert!(matches!(find_optimal_time(&spec, &disc, &bad, &inner), Err(Error::InvalidArgument(_))));
    let short = OuterOptions { t_init: 0.05, t_max: 0.1, ..OuterOptions::default() };
    assert!(matches!(find_optimal_time(&spec, &disc, &short, &inner), Err(Error::InfeasibleHorizon { .. })));
    let few = OuterOptions { max_newton: 1, ..OuterOptions::default() };
    assert!(matches!(find_optimal_time(&spec, &disc, &few, &inner), Err(Error::NonConvergence { .. })));
    let inside = ProblemSpec { y0: DataFunction::Zero, ..spec.clone() };
    assert!(matches!(find_optimal_time(&inside, &disc, &OuterOptions::default(), &inner), Err(Error::InfeasibleData(_))));
    let flipped = ProblemSpec { a: 3.0, b: -1.0, ..spec };
    assert!(matches!(find_optimal_time(&flipped, &disc, &OuterOptions::default(), &inner), Err(Error::InvalidArgument(_))));
}

#[test]
fn growth_check_is_reproducible_by_seed() {
    let (disc, spec) = example(4, 8);
    let outer = OuterOptions::default();
    let report = find_optimal_time(&spec, &disc, &outer, &InnerOptions::default()).unwrap();
    let a = growth_check(&report, &spec, &disc, 6, 99, &outer).unwrap();
    let b = growth_check(&report, &spec, &disc, 6, 99, &outer).unwrap();
    assert_eq!(a, b);
    assert!(a.all_above);
    assert!(a.samples.iter().enumerate().all(|(i, s)| s.index == i));
}

#[test]
fn physical_solution_of_the_optimum() {
    let (disc, spec) = example(8, 20);
    let report = find_optimal_time(&spec, &disc, &OuterOptions::default(), &InnerOptions::default()).unwrap();
    let inner = &report.inner;
    let phys = to_physical(report.t_opt, &inner.state.field, &inner.v_opt, spec.alpha, &disc.mesh).unwrap();
    assert!(phys.mixed_bound_violation(&spec, &disc.mesh) <= 1e-12);
    assert!((phys.y.time_grid.t.last().unwrap() - report.t_opt).abs() < 1e-15);
    // beyond the optimal time the extension is the terminal state, inside the ball
    let y_after = extend_right(&phys.y, 2.0 * report.t_opt);
    let dist = disc.norm_int(&y_after);
    assert!((dist - spec.lambda).abs() < 1e-8);

    let coarse = example(4, 10).0;
    let rc = find_optimal_time(&spec, &coarse, &OuterOptions::default(), &InnerOptions::default()).unwrap();
    let pc = to_physical(rc.t_opt, &rc.inner.state.field, &rc.inner.v_opt, spec.alpha, &coarse.mesh).unwrap();
    let d = sup_distance_extended((&phys.y, &disc.mesh), (&pc.y, &coarse.mesh), &disc.mesh, 50).unwrap();
    assert!(d > 0.0 && d.is_finite());
}

fn small_study(sequence: Vec<(usize, usize)>) -> totc::StudyConfig {
    totc::StudyConfig {
        mode: totc::study::StudyMode::TimeRefinement,
        sequence,
        reference: (80, 8),
        spec: ProblemSpec::paper_example(),
        outer: OuterOptions::default(),
        inner: InnerOptions::default(),
        reference_time: None,
    }
}

#[test]
fn study_rows_are_ordered_and_reproducible() {
    let cfg = small_study(vec![(5, 8), (10, 8), (20, 8)]);
    let a = totc::study::run_study(&cfg).unwrap();
    let b = totc::study::run_study(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.rows.iter().map(|r| r.m).collect::<Vec<_>>(), vec![5, 10, 20]);
    assert!(a.rows[0].eoc.is_none() && a.rows[1..].iter().all(|r| r.eoc.is_some()));
    assert_eq!(totc::study::monotonicity_violations(&a.rows), 0);
    assert!(a.fitted_slope.unwrap() > 0.5);
}

#[test]
fn failing_study_row_is_identified() {
    let err = totc::study::run_study(&small_study(vec![(5, 8), (10, 1)])).unwrap_err();
    match err {
        Error::StudyRow { row, m, n_div, .. } => assert_eq!((row, m, n_div), (1, 10, 1)),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(Error::InvalidHorizon(0.0).code(), "invalid-horizon");
}
