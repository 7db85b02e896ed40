use std::fs;

use neumann_rigidity::continuation::{branch_switch, continue_branch, rigidity_sweep};
use neumann_rigidity::discretization::{assemble, build_disk_mesh, build_rectangle_mesh};
use neumann_rigidity::io::{read_field, read_mesh, write_batch_csv, write_branch_csv, write_field, write_mesh, write_sweep_csv};
use neumann_rigidity::solver::SteadyStateProblem;
use neumann_rigidity::Error;
use tempfile::TempDir;

#[test]
fn stored_solution_reproduces_its_diagnostics() {
    let dir = TempDir::new().unwrap();
    let mesh = build_disk_mesh(3, 1.0).unwrap();
    write_mesh(&dir.path().join("disk.mesh"), &mesh).unwrap();
    let op = assemble(&read_mesh(&dir.path().join("disk.mesh")).unwrap()).unwrap();
    let p = SteadyStateProblem::new(op, 2.0, 4.0, 1e-10).unwrap();
    let eps_star = p.eps_star_predicted();
    // The disk's pattern sits farther from the constant than the square's;
    // the default amplitude falls back to the constant here.
    let rec = branch_switch(&p, eps_star, p.xi).unwrap();

    let path = dir.path().join("u.field");
    write_field(&path, &rec.u, rec.epsilon, p.a).unwrap();
    let back = read_field(&path).unwrap();
    assert_eq!(back.values, rec.u.0);
    assert_eq!(back.epsilon, rec.epsilon);
    let again = p.record(back.values, back.epsilon, rec.residual_norm, 0).unwrap();
    assert_eq!(again.diagnostics, rec.diagnostics);
}

#[test]
fn missing_files_name_the_path() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("absent.mesh");
    match read_mesh(&path) {
        Err(Error::Io(msg)) => assert!(msg.contains("absent.mesh"), "{msg}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(read_field(&dir.path().join("absent.field")), Err(Error::Io(_))));
}

#[test]
fn tables_have_one_row_per_record() {
    let dir = TempDir::new().unwrap();
    let op = assemble(&build_rectangle_mesh(12, 12, 1.0, 1.0).unwrap()).unwrap();
    let p = SteadyStateProblem::new(op, 2.0, 4.0, 1e-10).unwrap();
    let sweep = rigidity_sweep(&p, &[0.2, 1.0], 6, 1).unwrap();
    write_sweep_csv(&dir.path().join("sweep.csv"), &sweep.rows).unwrap();
    write_batch_csv(&dir.path().join("batch.csv"), &sweep.runs).unwrap();
    let sweep_csv = fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    let batch_csv = fs::read_to_string(dir.path().join("batch.csv")).unwrap();
    assert_eq!(sweep_csv.lines().count(), 3);
    assert_eq!(batch_csv.lines().count(), 13);
    assert_eq!(
        batch_csv.lines().next().unwrap(),
        "epsilon,start_id,converged,classification,mean,sup_fluct,residual_norm,iters"
    );

    let eps_star = p.eps_star_predicted();
    let start = branch_switch(&p, eps_star, 0.3 * p.xi).unwrap();
    let branch = continue_branch(&p, &start, &[0.9 * eps_star, 0.8 * eps_star]).unwrap();
    write_branch_csv(&dir.path().join("branch.csv"), &branch).unwrap();
    let branch_csv = fs::read_to_string(dir.path().join("branch.csv")).unwrap();
    assert_eq!(branch_csv.lines().count(), branch.len() + 1);
}
