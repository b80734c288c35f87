use super::*;
use crate::analytic::TerzaghiParams;
use crate::dataset::AxisSpec;
use crate::nns::SearchBackend;
use crate::problems::{Benchmark, PlateHoleConfig, PoissonCubeConfig, TerzaghiConfig};

fn terzaghi(kind: FormulationKind, points: usize, steps: usize) -> (Solver, TerzaghiParams) {
    let mut cfg = TerzaghiConfig::default().with_points(points);
    cfg.num_steps = steps;
    let problem = cfg.problem(kind).unwrap();
    let data = cfg.data(kind, SearchBackend::KdTree).unwrap();
    let config = SolverConfig { init: cfg.init(kind), ..SolverConfig::default() };
    (Solver::new(problem, data, config).unwrap(), cfg.analytic())
}

/// Largest relative nodal pressure error against the series solution.
fn pressure_error(s: &Solver, a: &TerzaghiParams) -> f64 {
    let t = s.global().t;
    let p0 = a.pressure(0.0, 1e-12).abs();
    (0..s.mesh().num_nodes())
        .map(|n| (s.nodal(n, Field::Pressure, 0) - a.pressure(s.mesh().node(n)[1], t)).abs() / p0)
        .fold(0.0, f64::max)
}

#[test]
fn model_based_terzaghi_follows_the_series_solution() {
    let (mut s, a) = terzaghi(FormulationKind::ModelBased, 3, 10);
    let reports = s.run().unwrap();
    assert_eq!(reports.len(), 10);
    let err = pressure_error(&s, &a);
    std::println!("model-based pressure error {err:e}");
    assert!(err < 0.03, "pressure error {err}");
    let top = s.mesh().node_set("top").unwrap()[0];
    let u = s.nodal(top, Field::Displacement, 1);
    let ua = a.displacement(1.0, s.global().t);
    assert!((u - ua).abs() < 0.03 * ua.abs(), "u_top {u} vs {ua}");
}

#[test]
fn fully_data_driven_terzaghi_approaches_the_model_based_run() {
    let (mut mb, _) = terzaghi(FormulationKind::ModelBased, 3, 10);
    mb.run().unwrap();
    let (mut dd, a) = terzaghi(FormulationKind::FullyDd, 4097, 10);
    let reports = dd.run().unwrap();
    let its: Vec<usize> = reports.iter().map(|r| r.iterations.len()).collect();
    std::println!("iterations {its:?}");
    assert!(reports.iter().all(|r| r.status == StepStatus::Converged));
    let err = pressure_error(&dd, &a);
    std::println!("data-driven pressure error {err:e}");
    let p0 = a.pressure(0.0, 1e-12).abs();
    let gap = (0..mb.mesh().num_nodes())
        .map(|n| (dd.nodal(n, Field::Pressure, 0) - mb.nodal(n, Field::Pressure, 0)).abs() / p0)
        .fold(0.0, f64::max);
    std::println!("gap to model-based {gap:e}");
    assert!(gap < 5e-3, "gap {gap}");
}

#[test]
fn hybrid_terzaghi_runs_agree_with_the_model_based_run() {
    let (mut mb, _) = terzaghi(FormulationKind::ModelBased, 3, 5);
    mb.run().unwrap();
    for kind in [FormulationKind::HybridFluidDd, FormulationKind::HybridSolidDd] {
        let (mut s, a) = terzaghi(kind, 4097, 5);
        let reports = s.run().unwrap();
        assert!(reports.iter().all(|r| r.status == StepStatus::Converged), "{kind:?}");
        let p0 = a.pressure(0.0, 1e-12).abs();
        let gap = (0..mb.mesh().num_nodes())
            .map(|n| (s.nodal(n, Field::Pressure, 0) - mb.nodal(n, Field::Pressure, 0)).abs() / p0)
            .fold(0.0, f64::max);
        assert!(gap < 5e-3, "{kind:?}: gap {gap}");
    }
}

#[test]
fn constant_operator_is_factorized_once_and_never_changes() {
    let mut cfg = TerzaghiConfig::default().with_points(257);
    cfg.num_steps = 3;
    let kind = FormulationKind::FullyDd;
    let config = SolverConfig {
        init: cfg.init(kind),
        verify_operator_constancy: true,
        verify_search: true,
        ..Default::default()
    };
    let mut s =
        Solver::new(cfg.problem(kind).unwrap(), cfg.data(kind, SearchBackend::KdTree).unwrap(), config).unwrap();
    s.run().unwrap();
    let d = s.diagnostics();
    assert_eq!(d.factorizations, 1);
    assert!(d.constancy_checks > 3);
    assert_eq!(d.constancy_violations, 0);
    assert!(d.max_relative_asymmetry < 1e-12, "asymmetry {}", d.max_relative_asymmetry);
    assert!(d.search_checks > 0);
    assert_eq!(d.search_mismatches, 0);
}

#[test]
fn shared_operator_reproduces_a_fresh_run() {
    let kind = FormulationKind::FullyDd;
    let (mut a, _) = terzaghi(kind, 257, 2);
    a.run().unwrap();
    let (mut b, _) = terzaghi(kind, 257, 2);
    b.use_operator(a.shared_operator().unwrap()).unwrap();
    b.run().unwrap();
    assert_eq!(a.global().x, b.global().x);
    assert_eq!(b.diagnostics().factorizations, 0);
}

#[test]
fn single_point_datasets_converge_in_one_iteration() {
    let cfg = TerzaghiConfig {
        num_steps: 2,
        fluid_axes: std::vec![AxisSpec::Fixed(0.0), AxisSpec::Fixed(-1e9)],
        solid_axes: std::vec![AxisSpec::Fixed(0.0), AxisSpec::Fixed(-0.01), AxisSpec::Fixed(0.0)],
        ..TerzaghiConfig::default()
    };
    let kind = FormulationKind::FullyDd;
    let config = SolverConfig { init: InitMode::Random { seed: 3 }, ..Default::default() };
    let mut s =
        Solver::new(cfg.problem(kind).unwrap(), cfg.data(kind, SearchBackend::KdTree).unwrap(), config).unwrap();
    for r in s.run().unwrap() {
        assert_eq!(r.iterations.len(), 1);
        assert_eq!(r.iterations[0].change_count, 0);
        assert_eq!(r.status, StepStatus::Converged);
    }
}

#[test]
fn kd_tree_and_brute_force_runs_are_identical() {
    let kind = FormulationKind::FullyDd;
    let mut cfg = TerzaghiConfig::default().with_points(513);
    cfg.num_steps = 3;
    let run = |backend| {
        let config = SolverConfig { init: cfg.init(kind), ..Default::default() };
        let mut s = Solver::new(cfg.problem(kind).unwrap(), cfg.data(kind, backend).unwrap(), config).unwrap();
        let reports = s.run().unwrap();
        (s.global().x.clone(), reports)
    };
    assert_eq!(run(SearchBackend::KdTree), run(SearchBackend::BruteForce));
}

#[test]
fn converged_states_satisfy_both_balance_laws() {
    let kind = FormulationKind::FullyDd;
    let (mut s, _) = terzaghi(kind, 1025, 3);
    s.run().unwrap();
    let r = s.balance_residuals().unwrap();
    assert!(r.momentum < 1e-8 && r.mass < 1e-8, "{r:?}");
    let (mut m, _) = terzaghi(FormulationKind::ModelBased, 3, 3);
    m.run().unwrap();
    let r = m.balance_residuals().unwrap();
    assert!(r.momentum < 1e-8 && r.mass < 1e-8, "{r:?}");
}

fn finite_difference_check(s: &Solver) {
    let x = s.free_values();
    let jac = s.jacobian().unwrap();
    let r0 = s.residual_at(&x).unwrap();
    let scale = x.iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-12);
    let n = x.len();
    let mut worst: f64 = 0.0;
    for j in (0..n).step_by((n / 25).max(1)) {
        let h = 1e-7 * x[j].abs().max(1e-6 * scale);
        let mut xp = x.clone();
        xp[j] += h;
        let mut xm = x.clone();
        xm[j] -= h;
        let rp = s.residual_at(&xp).unwrap();
        let rm = s.residual_at(&xm).unwrap();
        let col_norm = (0..n).map(|i| jac.get(i, j).abs()).fold(0.0, f64::max).max(1e-300);
        for i in 0..n {
            let fd = (rp[i] - rm[i]) / (2.0 * h);
            worst = worst.max((fd - jac.get(i, j)).abs() / col_norm);
        }
    }
    assert!(r0.iter().all(|v| v.is_finite()));
    assert!(worst < 1e-5, "worst relative column error {worst:e}");
}

#[test]
fn jacobian_matches_finite_differences_for_the_blend_skeleton() {
    for kind in [FormulationKind::ModelBased, FormulationKind::HybridFluidDd] {
        let mut cfg = PlateHoleConfig { n_tan: 2, n_rad: 2, num_steps: 1, ..Default::default() };
        cfg.fluid_axes = crate::problems::with_counts(&cfg.fluid_axes, 11);
        let config = SolverConfig { init: cfg.init(kind), ..Default::default() };
        let mut s =
            Solver::new(cfg.problem(kind).unwrap(), cfg.data(kind, SearchBackend::KdTree).unwrap(), config).unwrap();
        s.step().unwrap();
        // Perturb away from equilibrium so the check sees a generic state.
        let mut x = s.free_values();
        for (i, v) in x.iter_mut().enumerate() {
            *v *= 1.0 + 0.1 * ((i % 7) as f64 - 3.0) / 3.0;
        }
        s.residual_at(&x).unwrap();
        finite_difference_check(&s);
    }
}

#[test]
fn plate_model_based_newton_converges_quadratically() {
    let cfg = PlateHoleConfig { n_tan: 2, n_rad: 3, num_steps: 2, ..Default::default() };
    let kind = FormulationKind::ModelBased;
    let mut s = Solver::new(cfg.problem(kind).unwrap(), DataSources::default(), SolverConfig::default()).unwrap();
    for r in s.run().unwrap() {
        let h = &r.newton_history[0];
        assert!(h.len() >= 3 && h.len() < 12, "{h:?}");
        assert!(*h.last().unwrap() < 1e-10);
    }
}

#[test]
fn steady_diffusion_reproduces_the_quadratic_field() {
    let cfg = PoissonCubeConfig { n: 4, points_per_axis: 33, ..Default::default() };
    let kind = FormulationKind::SteadyDiffusion;
    let config = SolverConfig { init: cfg.init(kind), ..Default::default() };
    let mut s =
        Solver::new(cfg.problem(kind).unwrap(), cfg.data(kind, SearchBackend::KdTree).unwrap(), config).unwrap();
    let r = s.run().unwrap();
    assert_eq!(r.len(), 1);
    let worst = (0..s.mesh().num_nodes())
        .map(|n| {
            let x = s.mesh().node(n);
            (s.nodal(n, Field::Pressure, 0) - (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])).abs()
        })
        .fold(0.0, f64::max);
    assert!(worst < 0.05, "max nodal error {worst}");
}

#[test]
fn invalid_problems_are_rejected() {
    let cfg = TerzaghiConfig::default().with_points(5);
    let kind = FormulationKind::FullyDd;
    let mut p = cfg.problem(kind).unwrap();
    p.dt = 0.0;
    assert!(Solver::new(p, cfg.data(kind, SearchBackend::KdTree).unwrap(), SolverConfig::default()).is_err());
    let mut p = cfg.problem(kind).unwrap();
    p.metric = None;
    assert!(Solver::new(p, cfg.data(kind, SearchBackend::KdTree).unwrap(), SolverConfig::default()).is_err());
    let mut p = cfg.problem(kind).unwrap();
    p.quadrature_order = 4;
    assert!(Solver::new(p, cfg.data(kind, SearchBackend::KdTree).unwrap(), SolverConfig::default()).is_err());
    let p = cfg.problem(kind).unwrap();
    assert!(Solver::new(p, DataSources::default(), SolverConfig::default()).is_err());
    assert!(cfg.problem(FormulationKind::SteadyDiffusion).is_err());
}

#[test]
fn interpolated_fields_match_the_closed_states() {
    let (mut s, _) = terzaghi(FormulationKind::ModelBased, 3, 2);
    s.run().unwrap();
    let p = s.field_at_points(Field::Pressure, 0).unwrap();
    for (v, st) in p.iter().zip(s.states()) {
        assert!((v - st.pressure).abs() <= 1e-9 * st.pressure.abs().max(1.0));
    }
    assert!(s.field_at_points(Field::MassMultiplier, 0).is_none());
}
