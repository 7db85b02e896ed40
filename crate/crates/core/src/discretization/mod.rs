//! Triangulations of rectangles and disks, P1 stiffness assembly with
//! natural (Neumann) boundary conditions, and lumped mass.

mod assembly;
mod mesh;

pub use assembly::{assemble, local_stiffness, DiscreteOperator};
pub use mesh::{
    build_disk_mesh, build_rectangle_mesh, diameter, disk_rings, domain_metrics, Mesh, Point,
};
pub(crate) use mesh::dist;
