use std::f64::consts::PI;

use neumann_rigidity::discretization::{assemble, build_rectangle_mesh, DiscreteOperator};
use neumann_rigidity::scalar_model::eval_f;
use neumann_rigidity::solver::{Classification, NewtonOptions, SteadyStateProblem};

const XI2: f64 = 1.2564312086261697;

fn square(n: usize) -> DiscreteOperator {
    assemble(&build_rectangle_mesh(n, n, 1.0, 1.0).unwrap()).unwrap()
}

fn problem(n: usize) -> SteadyStateProblem {
    SteadyStateProblem::new(square(n), 2.0, 4.0, 1e-10).unwrap()
}

fn zero_average(u: &[f64], mass: &[f64]) -> f64 {
    u.iter().zip(mass).map(|(&t, m)| m * eval_f(t, 2.0)).sum::<f64>().abs()
}

#[test]
fn cosine_start_below_onset_is_nonconstant() {
    let p = problem(32);
    let u0 = p.op.interpolate(|x, _| XI2 + 0.4 * (PI * x).cos());
    let rec = p.newton_solve(&u0, 0.14).unwrap();
    match rec.classification {
        Classification::Nonconstant { sup_fluct } => assert!(sup_fluct > 0.1, "{sup_fluct}"),
        other => panic!("{other:?}"),
    }
    assert!(rec.diagnostics.all_pass());
    assert!(rec.diagnostics.poincare_pass);
    // Above onset the same start decays to the constant.
    let rec = p.newton_solve(&u0, 0.3).unwrap();
    assert!(rec.is_constant());
    assert!((rec.mean - XI2).abs() < 1e-9);
}

#[test]
fn rigidity_regime_has_only_the_constants() {
    let p = problem(24);
    let report = p.multi_start(1.0, 50, 3).unwrap();
    let kinds: Vec<Classification> = report.solutions.iter().map(|s| s.classification).collect();
    assert_eq!(kinds.len(), 2, "{kinds:?}");
    match (kinds[0], kinds[1]) {
        (Classification::Constant { value: v0 }, Classification::Constant { value: v1 }) => {
            assert!(v0.abs() < 1e-9);
            assert!((v1 - XI2).abs() < 1e-9);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn below_onset_multi_start_finds_a_pattern() {
    let p = problem(24);
    let report = p.multi_start(0.14, 50, 3).unwrap();
    assert!(report.any_nonconstant());
    let tol = p.newton_tol();
    for s in &report.solutions {
        assert!(s.residual_norm <= tol);
        assert!(zero_average(&s.u, &p.op.lumped_mass) <= 10.0 * tol);
        assert!(s.diagnostics.all_pass(), "{:?}", s.diagnostics);
    }
}

#[test]
fn distinct_solutions_do_not_depend_on_start_order() {
    let p = problem(16);
    let family = p.start_family(20, 11);
    let mut reversed = family.clone();
    reversed.reverse();
    for eps in [0.1, 0.6] {
        let a = p.multi_start_from(eps, &family);
        let b = p.multi_start_from(eps, &reversed);
        assert_eq!(a.solutions.len(), b.solutions.len(), "eps {eps}");
        for (x, y) in a.solutions.iter().zip(&b.solutions) {
            assert_eq!(x.classification.label(), y.classification.label());
            assert!((x.mean - y.mean).abs() < 1e-8);
            assert!((x.sup_fluct - y.sup_fluct).abs() < 1e-6);
        }
    }
}

#[test]
fn step_cap_does_not_change_the_limit() {
    let p = problem(12);
    let u0 = vec![0.9 * XI2; p.dim()];
    for cap in [None, Some(1.0), Some(0.05)] {
        let opts = NewtonOptions {
            max_step: cap,
            ..NewtonOptions::default()
        };
        let rec = p.newton_solve_with(&u0, 1.0, &opts).unwrap();
        assert!((rec.mean - XI2).abs() < 1e-9, "{cap:?}");
    }
}

#[test]
fn translating_a_pattern_keeps_its_fluctuation() {
    let p = problem(24);
    let u0 = p.op.interpolate(|x, _| XI2 + 0.4 * (PI * x).cos());
    let rec = p.newton_solve(&u0, 0.14).unwrap();
    let shifted: Vec<f64> = rec.u.iter().map(|v| v - 0.75).collect();
    let moved = neumann_rigidity::solver::classify(&shifted, &p.op.lumped_mass);
    match (rec.classification, moved) {
        (Classification::Nonconstant { sup_fluct: s0 }, Classification::Nonconstant { sup_fluct: s1 }) => {
            assert!((s0 - s1).abs() < 1e-12)
        }
        other => panic!("{other:?}"),
    }
}
