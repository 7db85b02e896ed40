use super::mesh::{domain_metrics, signed_area, Mesh, Point};
use crate::error::{Error, Result};
use crate::linalg::SparseSym;

/// Stiffness matrix, lumped mass and domain metrics of a mesh. Immutable
/// once built.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub mesh: Mesh,
    pub stiffness: SparseSym,
    pub lumped_mass: Vec<f64>,
    pub area: f64,
    pub diameter: f64,
    /// Longest mesh edge.
    pub h: f64,
}

impl DiscreteOperator {
    pub fn dim(&self) -> usize {
        self.lumped_mass.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.mesh.nodes
    }

    /// Nodal interpolant of `g`.
    pub fn interpolate(&self, g: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        self.mesh.nodes.iter().map(|p| g(p[0], p[1])).collect()
    }
}

/// `∫ ∇φ_i · ∇φ_j` for the three P1 basis functions of a triangle.
pub fn local_stiffness(p: [Point; 3]) -> Result<[[f64; 3]; 3]> {
    let area = signed_area(p[0], p[1], p[2]);
    if !(area > 0.0) {
        return Err(Error::InvalidMesh(format!(
            "inverted or degenerate triangle (signed area {area:e})"
        )));
    }
    // ∇φ_i = (y_j - y_k, x_k - x_j) / (2 area) for (i, j, k) cyclic.
    let mut grad = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        grad[i] = [p[j][1] - p[k][1], p[k][0] - p[j][0]];
    }
    let mut local = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            local[i][j] = (grad[i][0] * grad[j][0] + grad[i][1] * grad[j][1]) / (4.0 * area);
        }
    }
    Ok(local)
}

/// P1 stiffness matrix and row-sum lumped mass (`area / 3` per vertex).
pub fn assemble(mesh: &Mesh) -> Result<DiscreteOperator> {
    let n = mesh.num_nodes();
    let mut triplets = Vec::with_capacity(9 * mesh.triangles.len());
    let mut lumped_mass = vec![0.0; n];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        if tri.iter().any(|&i| i >= n) {
            return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
        }
        let pts = [mesh.nodes[tri[0]], mesh.nodes[tri[1]], mesh.nodes[tri[2]]];
        let local = local_stiffness(pts).map_err(|e| match e {
            Error::InvalidMesh(msg) => Error::InvalidMesh(format!("triangle {t}: {msg}")),
            other => other,
        })?;
        let third = mesh.triangle_area(t) / 3.0;
        for a in 0..3 {
            lumped_mass[tri[a]] += third;
            for b in 0..3 {
                triplets.push((tri[a], tri[b], local[a][b]));
            }
        }
    }
    if let Some(i) = lumped_mass.iter().position(|&m| !(m > 0.0)) {
        return Err(Error::InvalidMesh(format!("node {i} has no mass (not in any triangle)")));
    }
    let stiffness = SparseSym::from_triplets(n, &triplets, 1e-15)?;
    let (_, diameter) = domain_metrics(mesh);
    let area = lumped_mass.iter().sum();
    Ok(DiscreteOperator {
        mesh: mesh.clone(),
        stiffness,
        lumped_mass,
        area,
        diameter,
        h: mesh.max_edge_length(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{build_disk_mesh, build_rectangle_mesh};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    #[test]
    fn reference_triangle_local_matrix() {
        let local = local_stiffness([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        let expected = [[1.0, -0.5, -0.5], [-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5]];
        for i in 0..3 {
            for j in 0..3 {
                assert!((local[i][j] - expected[i][j]).abs() < 1e-15);
            }
        }
        assert!(local_stiffness([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    #[test]
    fn constants_in_nullspace() {
        for mesh in [
            build_rectangle_mesh(17, 9, 1.0, 1.0).unwrap(),
            build_rectangle_mesh(64, 64, 1.0, 1.0).unwrap(),
            build_disk_mesh(3, 1.0).unwrap(),
        ] {
            let op = assemble(&mesh).unwrap();
            let a1 = op.stiffness.mul_vec(&vec![1.0; op.dim()]);
            assert!(a1.iter().all(|v| v.abs() <= 1e-13));
        }
    }

    #[test]
    fn symmetric_and_semidefinite() {
        let op = assemble(&build_disk_mesh(2, 1.0).unwrap()).unwrap();
        let scale = op.stiffness.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(op.stiffness.max_asymmetry() <= 1e-14 * scale);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let x: Vec<f64> = (0..op.dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            assert!(op.stiffness.quadratic_form(&x) >= -1e-12);
        }
    }

    #[test]
    fn mass_sums_to_area() {
        let op = assemble(&build_rectangle_mesh(2, 2, 1.0, 1.0).unwrap()).unwrap();
        assert!((op.area - 1.0).abs() < 1e-15);
        let op = assemble(&build_rectangle_mesh(64, 64, 1.0, 1.0).unwrap()).unwrap();
        assert!((op.area - 1.0).abs() < 1e-12);
        assert!(op.lumped_mass.iter().all(|&m| m > 0.0));
    }

    #[test]
    fn patch_test_linear_field() {
        let op = assemble(&build_rectangle_mesh(13, 7, 1.0, 1.0).unwrap()).unwrap();
        let u = op.interpolate(|x, _| x);
        assert!((op.stiffness.quadratic_form(&u) - 1.0).abs() < 1e-12);
        let u = op.interpolate(|x, y| 2.0 * x - y);
        assert!((op.stiffness.quadratic_form(&u) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn galerkin_energy_of_cosine() {
        let exact = PI * PI / 2.0;
        let energy = |n: usize| {
            let op = assemble(&build_rectangle_mesh(n, n, 1.0, 1.0).unwrap()).unwrap();
            op.stiffness.quadratic_form(&op.interpolate(|x, _| (PI * x).cos()))
        };
        let e64 = energy(64);
        assert!((e64 - exact).abs() < 0.005 * exact);
        let (e16, e32) = (energy(16), energy(32));
        let ratio = (e16 - exact).abs() / (e32 - exact).abs();
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn lumped_quadrature_of_x_squared() {
        let op = assemble(&build_rectangle_mesh(64, 64, 1.0, 1.0).unwrap()).unwrap();
        let g = op.interpolate(|x, _| x * x);
        let integral: f64 = g.iter().zip(&op.lumped_mass).map(|(g, m)| g * m).sum();
        assert!((integral - 1.0 / 3.0).abs() < 1e-3);
    }
}
