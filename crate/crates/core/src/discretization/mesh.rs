use std::collections::HashMap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Planar triangulation with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub nodes: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    pub boundary_nodes: Vec<usize>,
}

pub(crate) fn signed_area(p: Point, q: Point, r: Point) -> f64 {
    0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
}

impl Mesh {
    /// Builds a mesh from raw nodes and triangles, orienting nothing and
    /// deriving the boundary from edges that belong to a single triangle.
    pub fn new(nodes: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let boundary_nodes = boundary_from_edges(&triangles);
        let mesh = Self {
            nodes,
            triangles,
            boundary_nodes,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [i, j, k] = self.triangles[t];
        signed_area(self.nodes[i], self.nodes[j], self.nodes[k])
    }

    /// Positive orientation, index bounds, and conformity (every interior
    /// edge shared by exactly two triangles with opposite orientation).
    pub fn validate(&self) -> Result<()> {
        if self.triangles.is_empty() {
            return Err(Error::InvalidMesh("no triangles".into()));
        }
        let n = self.nodes.len();
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!("triangle {t} references a missing node")));
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::InvalidMesh(format!("triangle {t} repeats a node")));
            }
            let area = self.triangle_area(t);
            if !(area > 0.0) {
                return Err(Error::InvalidMesh(format!(
                    "triangle {t} is inverted or degenerate (signed area {area:e})"
                )));
            }
        }
        let mut directed: HashMap<(usize, usize), usize> = HashMap::new();
        for tri in &self.triangles {
            for e in 0..3 {
                let edge = (tri[e], tri[(e + 1) % 3]);
                *directed.entry(edge).or_default() += 1;
            }
        }
        for (&(i, j), &count) in &directed {
            if count > 1 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({i}, {j}) used twice with the same orientation"
                )));
            }
        }
        let mut used = vec![false; n];
        for tri in &self.triangles {
            for &i in tri {
                used[i] = true;
            }
        }
        if let Some(i) = used.iter().position(|u| !u) {
            return Err(Error::InvalidMesh(format!("node {i} belongs to no triangle")));
        }
        Ok(())
    }

    /// Longest edge over all triangles.
    pub fn max_edge_length(&self) -> f64 {
        self.triangles
            .iter()
            .flat_map(|t| (0..3).map(move |e| (t[e], t[(e + 1) % 3])))
            .map(|(i, j)| dist(self.nodes[i], self.nodes[j]))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn dist(p: Point, q: Point) -> f64 {
    (p[0] - q[0]).hypot(p[1] - q[1])
}

fn boundary_from_edges(triangles: &[[usize; 3]]) -> Vec<usize> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in triangles {
        for e in 0..3 {
            let (i, j) = (tri[e], tri[(e + 1) % 3]);
            *count.entry((i.min(j), i.max(j))).or_default() += 1;
        }
    }
    let mut nodes: Vec<usize> = count
        .into_iter()
        .filter(|&(_, c)| c == 1)
        .flat_map(|((i, j), _)| [i, j])
        .collect();
    nodes.sort_unstable();
    nodes.dedup();
    nodes
}

/// Structured triangulation of `[0, lx] × [0, ly]` with `nx × ny` cells.
///
/// Diagonals alternate with the parity of the cell index ("union jack"),
/// so for even `nx`, `ny` the mesh carries every reflection symmetry of the
/// rectangle. Nodes are numbered row by row: node `(i, j)` has index
/// `j (nx + 1) + i`.
pub fn build_rectangle_mesh(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidParameter(format!(
            "rectangle mesh needs at least 2 cells per direction (got {nx} x {ny})"
        )));
    }
    if !(lx > 0.0 && ly > 0.0) || !lx.is_finite() || !ly.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "rectangle side lengths must be positive (got {lx} x {ly})"
        )));
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            let x = if i == nx { lx } else { lx * i as f64 / nx as f64 };
            let y = if j == ny { ly } else { ly * j as f64 / ny as f64 };
            nodes.push([x, y]);
        }
    }
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (p00, p10, p01, p11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            if (i + j) % 2 == 0 {
                triangles.push([p00, p10, p11]);
                triangles.push([p00, p11, p01]);
            } else {
                triangles.push([p00, p10, p01]);
                triangles.push([p10, p11, p01]);
            }
        }
    }
    let mut boundary_nodes = Vec::new();
    for j in 0..=ny {
        for i in 0..=nx {
            if i == 0 || j == 0 || i == nx || j == ny {
                boundary_nodes.push(idx(i, j));
            }
        }
    }
    Ok(Mesh {
        nodes,
        triangles,
        boundary_nodes,
    })
}

/// Number of concentric rings used by [`build_disk_mesh`] at a refinement level.
pub fn disk_rings(refinement: usize) -> usize {
    4 * refinement
}

/// Quasi-uniform triangulation of the polygon inscribed in the disk of the
/// given radius centred at the origin.
///
/// Ring `k` (for `k = 1..=N`, `N = 4 * refinement`) carries `6k` equally
/// spaced nodes at radius `k r / N`; neighbouring rings are stitched by
/// advancing along whichever ring has the smaller next angle. The boundary
/// is the regular `6N`-gon.
pub fn build_disk_mesh(refinement: usize, radius: f64) -> Result<Mesh> {
    if refinement == 0 {
        return Err(Error::InvalidParameter("disk refinement must be at least 1".into()));
    }
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!("radius must be positive (got {radius})")));
    }
    let rings = disk_rings(refinement);
    let mut nodes: Vec<Point> = vec![[0.0, 0.0]];
    // ring_start[k] = index of the first node of ring k.
    let mut ring_start = vec![0usize];
    for k in 1..=rings {
        ring_start.push(nodes.len());
        let r = radius * k as f64 / rings as f64;
        let count = 6 * k;
        for j in 0..count {
            let theta = 2.0 * PI * j as f64 / count as f64;
            nodes.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles = Vec::new();
    // Innermost fan.
    for j in 0..6 {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % 6]);
    }
    for k in 1..rings {
        let (inner_n, outer_n) = (6 * k, 6 * (k + 1));
        let (inner0, outer0) = (ring_start[k], ring_start[k + 1]);
        let (mut a, mut b) = (0usize, 0usize);
        while a < inner_n || b < outer_n {
            // Angles measured in units of full turns to compare exactly.
            let next_inner = (a + 1) as f64 / inner_n as f64;
            let next_outer = (b + 1) as f64 / outer_n as f64;
            let ia = inner0 + a % inner_n;
            let ob = outer0 + b % outer_n;
            if b < outer_n && (a >= inner_n || next_outer <= next_inner) {
                triangles.push([ia, ob, outer0 + (b + 1) % outer_n]);
                b += 1;
            } else {
                triangles.push([ia, ob, inner0 + (a + 1) % inner_n]);
                a += 1;
            }
        }
    }
    let boundary_nodes = (ring_start[rings]..nodes.len()).collect();
    Ok(Mesh {
        nodes,
        triangles,
        boundary_nodes,
    })
}

/// Diameter of a point set, computed on its convex hull (monotone chain
/// followed by an exhaustive scan of hull vertex pairs).
pub fn diameter(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for (i, &p) in hull.iter().enumerate() {
        for &q in &hull[i + 1..] {
            best = best.max(dist(p, q));
        }
    }
    best
}

fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|p, q| p[0].total_cmp(&q[0]).then(p[1].total_cmp(&q[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
    let mut hull: Vec<Point> = Vec::with_capacity(2 * pts.len());
    for &p in pts.iter().chain(pts.iter().rev().skip(1)) {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// `(area, diameter)` of the meshed domain.
pub fn domain_metrics(mesh: &Mesh) -> (f64, f64) {
    let area = (0..mesh.triangles.len()).map(|t| mesh.triangle_area(t)).sum();
    (area, diameter(&mesh.nodes))
}
