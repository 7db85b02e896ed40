use std::collections::HashMap;
use std::f64::consts::PI;

use neumann_rigidity::continuation::{
    branch_switch, branch_switch_along, continue_branch, detect_bifurcation, rigidity_sweep, stability_indicator,
    trace_branch,
};
use neumann_rigidity::discretization::{assemble, build_disk_mesh, build_rectangle_mesh, DiscreteOperator, Point};
use neumann_rigidity::scalar_model::eval_f_prime;
use neumann_rigidity::solver::SteadyStateProblem;
use neumann_rigidity::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const EPS_STAR_CONTINUUM: f64 = 0.153285;

fn square(n: usize) -> SteadyStateProblem {
    let op = assemble(&build_rectangle_mesh(n, n, 1.0, 1.0).unwrap()).unwrap();
    SteadyStateProblem::new(op, 2.0, 4.0, 1e-10).unwrap()
}

/// `perm[i]` is the node at `map(node i)`.
fn node_permutation(op: &DiscreteOperator, map: impl Fn(Point) -> Point) -> Vec<usize> {
    let key = |p: Point| ((p[0] * 1e8).round() as i64, (p[1] * 1e8).round() as i64);
    let index: HashMap<_, usize> = op.nodes().iter().enumerate().map(|(i, &p)| (key(p), i)).collect();
    op.nodes().iter().map(|&p| index[&key(map(p))]).collect()
}

fn max_diff_after(u: &[f64], w: &[f64], perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| (u[i] - w[j]).abs()).fold(0.0, f64::max)
}

#[test]
fn indicator_matches_spectrum_at_random_eps() {
    let p = square(16);
    let fp = eval_f_prime(p.xi, 2.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let eps = rng.gen_range(0.02..3.0);
        let lambda = stability_indicator(&vec![p.xi; p.dim()], eps, 2.0, &p.op).unwrap();
        let exact = eps * p.mu1() - fp;
        assert!((lambda - exact).abs() <= 1e-6 * exact.abs(), "eps {eps}: {lambda} vs {exact}");
    }
}

#[test]
fn detection_closes_the_loop_on_square_and_disk() {
    let disk = SteadyStateProblem::new(assemble(&build_disk_mesh(3, 1.0).unwrap()).unwrap(), 2.0, 4.0, 1e-10).unwrap();
    for p in [square(20), disk] {
        let pred = p.eps_star_predicted();
        let eps = detect_bifurcation(&p, (0.5 * pred, 1.5 * pred), 1e-10 * pred).unwrap();
        let fp = eval_f_prime(p.xi, 2.0);
        assert!((eps * p.mu1() - fp).abs() <= 1e-6 * fp);
    }
}

#[test]
fn detected_onset_converges_under_refinement() {
    let errors: Vec<f64> = [8, 16, 32]
        .into_iter()
        .map(|n| {
            let p = square(n);
            let pred = p.eps_star_predicted();
            let eps = detect_bifurcation(&p, (0.5 * pred, 1.5 * pred), 1e-10).unwrap();
            (eps - EPS_STAR_CONTINUUM).abs()
        })
        .collect();
    assert!(errors[1] < errors[0] && errors[2] < errors[1], "{errors:?}");
    assert!(errors[2] < 0.01 * EPS_STAR_CONTINUUM);
}

#[test]
fn switch_lands_on_the_pattern_or_reports_the_constant() {
    let p = square(24);
    let eps_star = p.eps_star_predicted();
    let rec = branch_switch(&p, eps_star, 0.3 * p.xi).unwrap();
    assert!(rec.sup_fluct > 0.01);
    assert!((rec.epsilon - 0.95 * eps_star).abs() < 1e-15);
    assert!(rec.diagnostics.all_pass());
    match branch_switch(&p, eps_star, 1e-3) {
        Err(Error::FellBackToConstant(mean)) => assert!((mean - p.xi).abs() < 1e-9),
        other => panic!("{other:?}"),
    }
}

#[test]
fn opposite_amplitudes_give_reflected_solutions() {
    let p = square(24);
    let eps_star = p.eps_star_predicted();

    // φ₁ is some vector of the double eigenspace; every such vector is odd
    // under the point reflection through the centre.
    let centre = node_permutation(&p.op, |q| [1.0 - q[0], 1.0 - q[1]]);
    let plus = branch_switch(&p, eps_star, 0.3 * p.xi).unwrap();
    let minus = branch_switch(&p, eps_star, -0.3 * p.xi).unwrap();
    assert!(max_diff_after(&plus.u, &minus.u, &centre) < 1e-6);

    let mirror = node_permutation(&p.op, |q| [1.0 - q[0], q[1]]);
    let dir = p.op.interpolate(|x, _| (PI * x).cos());
    let plus = branch_switch_along(&p, eps_star, 0.4, 0.05, Some(&dir)).unwrap();
    let minus = branch_switch_along(&p, eps_star, -0.4, 0.05, Some(&dir)).unwrap();
    assert!(max_diff_after(&plus.u, &minus.u, &mirror) < 1e-6);
    assert!(max_diff_after(&plus.u, &plus.u, &mirror) > 0.01);
}

#[test]
fn branch_grows_downward_and_closes_upward() {
    let p = square(24);
    let eps_star = p.eps_star_predicted();
    let start = branch_switch(&p, eps_star, 0.3 * p.xi).unwrap();

    let down: Vec<f64> = [0.9, 0.8, 0.7, 0.6].iter().map(|s| s * eps_star).collect();
    let branch = continue_branch(&p, &start, &down).unwrap();
    assert_eq!(branch.last().unwrap().epsilon, down[3]);
    let mut fluct = start.sup_fluct;
    for point in &branch {
        assert!(point.solution.sup_fluct > fluct);
        fluct = point.solution.sup_fluct;
        assert!(point.solution.diagnostics.all_pass(), "{:?}", point.solution.diagnostics);
        assert!(point.solution.residual_norm <= p.newton_tol());
    }

    let up: Vec<f64> = [0.98, 0.995, 1.005, 1.02].iter().map(|s| s * eps_star).collect();
    let (points, err) = trace_branch(&p, &start, &up);
    assert!(err.is_none(), "{err:?}");
    let last = points.last().unwrap();
    assert!(last.solution.is_constant());
    assert!(last.solution.sup_fluct < 1e-6);
    assert!(last.stability_indicator > 0.0);
}

#[test]
fn sweep_is_deterministic_across_thread_pools() {
    let p = square(12);
    let grid = [0.1, 0.4, 2.0];
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| rigidity_sweep(&p, &grid, 12, 9).unwrap())
    };
    let (a, b) = (run(1), run(3));
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.runs, b.runs);
    assert_eq!(a.eps_hat, b.eps_hat);
}
