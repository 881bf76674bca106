//! Conforming P1 triangulations of the disk `B(0, R)` whose edge set
//! contains the boundary of a polygonal target region.

mod generate;
mod io;

use std::collections::HashMap;
use std::f64::consts::TAU;

pub use generate::generate_disk_mesh;
pub use io::{load_mesh, read_mesh, save_mesh, write_mesh};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Triangulated disk with an ordered boundary and target-region flags.
#[derive(Debug, Clone)]
pub struct TriMesh {
    pub nodes: Vec<Point>,
    /// Counterclockwise node-index triples.
    pub triangles: Vec<[usize; 3]>,
    /// Boundary node indices sorted by polar angle in `[0, 2π)`.
    pub boundary_nodes: Vec<usize>,
    /// Polar angle of each entry of `boundary_nodes`.
    pub boundary_angles: Vec<f64>,
    /// Whether each triangle lies inside the target region.
    pub omega0_triangles: Vec<bool>,
    /// Target edge length; unknown for meshes read from disk.
    pub nominal_h: Option<f64>,
}

/// Polar angle of `p` mapped to `[0, 2π)`.
pub fn polar_angle(p: Point) -> f64 {
    let t = p[1].atan2(p[0]);
    if t < 0.0 {
        let w = t + TAU;
        // t = -0.0 or a tiny negative angle can round up to exactly 2π.
        if w >= TAU { 0.0 } else { w }
    } else {
        t
    }
}

pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))
}

/// Shoelace area (positive for counterclockwise vertex order).
pub fn polygon_area(poly: &[Point]) -> f64 {
    let n = poly.len();
    0.5 * (0..n)
        .map(|i| {
            let (p, q) = (poly[i], poly[(i + 1) % n]);
            p[0] * q[1] - q[0] * p[1]
        })
        .sum::<f64>()
}

fn coord(p: Point) -> robust::Coord<f64> {
    robust::Coord { x: p[0], y: p[1] }
}

/// Winding-number point-in-polygon test with exact orientation predicates.
/// Points on the polygon boundary count as outside.
pub fn point_in_polygon(p: Point, poly: &[Point]) -> bool {
    let n = poly.len();
    let mut winding = 0i32;
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let orient = robust::orient2d(coord(a), coord(b), coord(p));
        if a[1] <= p[1] {
            if b[1] > p[1] && orient > 0.0 {
                winding += 1;
            }
        } else if b[1] <= p[1] && orient < 0.0 {
            winding -= 1;
        }
    }
    winding != 0
}

/// Minimum interior angle of triangle `abc`, in degrees.
pub fn min_angle_deg(a: Point, b: Point, c: Point) -> f64 {
    let angle = |p: Point, q: Point, r: Point| {
        let u = [q[0] - p[0], q[1] - p[1]];
        let v = [r[0] - p[0], r[1] - p[1]];
        let cross = u[0] * v[1] - u[1] * v[0];
        let dot = u[0] * v[0] + u[1] * v[1];
        cross.abs().atan2(dot).to_degrees()
    };
    angle(a, b, c).min(angle(b, c, a)).min(angle(c, a, b))
}

impl TriMesh {
    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn vertices(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.nodes[a], self.nodes[b], self.nodes[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.vertices(t);
        signed_area(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.vertices(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    pub fn total_area(&self) -> f64 {
        (0..self.num_triangles()).map(|t| self.area(t)).sum()
    }

    /// Total area of the triangles flagged as inside the target region.
    pub fn omega0_area(&self) -> f64 {
        (0..self.num_triangles())
            .filter(|&t| self.omega0_triangles[t])
            .map(|t| self.area(t))
            .sum()
    }

    pub fn min_angle_deg(&self) -> f64 {
        (0..self.num_triangles())
            .map(|t| {
                let [a, b, c] = self.vertices(t);
                min_angle_deg(a, b, c)
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Undirected edges with the number of triangles sharing each.
    pub fn edge_counts(&self) -> HashMap<(usize, usize), usize> {
        let mut counts = HashMap::new();
        for tri in &self.triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                *counts.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        counts
    }

    pub fn num_edges(&self) -> usize {
        self.edge_counts().len()
    }

    /// Mean length over all edges.
    pub fn mean_edge_length(&self) -> f64 {
        let counts = self.edge_counts();
        let total: f64 = counts
            .keys()
            .map(|&(a, b)| {
                let (p, q) = (self.nodes[a], self.nodes[b]);
                (p[0] - q[0]).hypot(p[1] - q[1])
            })
            .sum();
        total / counts.len() as f64
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.triangles.iter().any(|t| t.contains(&a) && t.contains(&b))
    }

    /// Index of the node closest to `p`.
    pub fn nearest_node(&self, p: Point) -> usize {
        let d2 = |q: &Point| (q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2);
        (0..self.num_nodes())
            .min_by(|&i, &j| d2(&self.nodes[i]).total_cmp(&d2(&self.nodes[j])))
            .expect("mesh has nodes")
    }

    /// Per-node flag marking boundary nodes.
    pub fn boundary_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.num_nodes()];
        for &i in &self.boundary_nodes {
            mask[i] = true;
        }
        mask
    }

    /// Radius of the disk, taken from the first boundary node.
    pub fn radius(&self) -> f64 {
        let p = self.nodes[self.boundary_nodes[0]];
        p[0].hypot(p[1])
    }

    /// Recomputes the target-region flags by centroid test against `poly`.
    pub fn flag_polygon(&mut self, poly: &[Point]) {
        self.omega0_triangles = (0..self.num_triangles())
            .map(|t| point_in_polygon(self.centroid(t), poly))
            .collect();
    }

    /// Checks that every edge of `poly` is a union of mesh edges.
    pub fn resolves_polygon(&self, poly: &[Point]) -> bool {
        let counts = self.edge_counts();
        let n = poly.len();
        (0..n).all(|e| {
            let (a, b) = (poly[e], poly[(e + 1) % n]);
            let len = (b[0] - a[0]).hypot(b[1] - a[1]);
            // Mesh edges lying on segment ab must tile it exactly.
            let on_segment = |p: Point| {
                let cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
                let t = ((p[0] - a[0]) * (b[0] - a[0]) + (p[1] - a[1]) * (b[1] - a[1])) / (len * len);
                cross.abs() <= 1e-12 * len * len && (-1e-12..=1.0 + 1e-12).contains(&t)
            };
            let covered: f64 = counts
                .keys()
                .filter(|&&(i, j)| on_segment(self.nodes[i]) && on_segment(self.nodes[j]))
                .map(|&(i, j)| {
                    let (p, q) = (self.nodes[i], self.nodes[j]);
                    (p[0] - q[0]).hypot(p[1] - q[1])
                })
                .sum();
            (covered - len).abs() <= 1e-10 * len
        })
    }

    /// Verifies the structural invariants of a disk triangulation.
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::MeshValidation(msg));
        let n = self.num_nodes();
        if self.triangles.is_empty() || self.boundary_nodes.len() < 3 {
            return fail("mesh has no triangles or fewer than 3 boundary nodes".into());
        }
        if self.omega0_triangles.len() != self.num_triangles()
            || self.boundary_angles.len() != self.boundary_nodes.len()
        {
            return fail("per-triangle or per-boundary-node arrays have wrong length".into());
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&i| i >= n) {
                return fail(format!("triangle {t} references a node index >= {n}"));
            }
            if self.area(t) <= 0.0 {
                return fail(format!("triangle {t} is not counterclockwise"));
            }
        }
        let radius = self.radius();
        for &i in &self.boundary_nodes {
            if i >= n {
                return fail(format!("boundary node index {i} >= {n}"));
            }
            let r = self.nodes[i][0].hypot(self.nodes[i][1]);
            if (r - radius).abs() > 1e-12 * radius {
                return fail(format!("boundary node {i} is off the circle (r = {r})"));
            }
        }
        if self.boundary_angles.windows(2).any(|w| w[0] >= w[1]) {
            return fail("boundary angles are not strictly increasing".into());
        }

        let counts = self.edge_counts();
        let mut boundary_adj: HashMap<usize, Vec<usize>> = HashMap::new();
        for (&(a, b), &c) in &counts {
            match c {
                1 => {
                    boundary_adj.entry(a).or_default().push(b);
                    boundary_adj.entry(b).or_default().push(a);
                }
                2 => {}
                _ => return fail(format!("edge ({a}, {b}) shared by {c} triangles")),
            }
        }
        // Boundary edges must form one cycle through exactly the boundary nodes,
        // in angular order.
        let m = self.boundary_nodes.len();
        if boundary_adj.len() != m {
            return fail(format!(
                "{} nodes lie on boundary edges, expected {m}",
                boundary_adj.len()
            ));
        }
        for k in 0..m {
            let (a, b) = (self.boundary_nodes[k], self.boundary_nodes[(k + 1) % m]);
            if counts.get(&(a.min(b), a.max(b))) != Some(&1) {
                return fail(format!("boundary nodes {a} and {b} are not joined by a boundary edge"));
            }
        }
        let euler = n as i64 - counts.len() as i64 + self.num_triangles() as i64;
        if euler != 1 {
            return fail(format!("Euler characteristic {euler}, expected 1"));
        }
        Ok(())
    }

    /// Boundary node indices paired with their polar angles.
    pub fn boundary_parameterization(&self) -> Vec<(usize, f64)> {
        boundary_parameterization(self)
    }
}

/// `(node, θ)` for every boundary node with `θ = atan2(y, x)` in `[0, 2π)`,
/// sorted by strictly increasing angle.
pub fn boundary_parameterization(mesh: &TriMesh) -> Vec<(usize, f64)> {
    let mut out: Vec<(usize, f64)> = mesh
        .boundary_nodes
        .iter()
        .map(|&i| (i, polar_angle(mesh.nodes[i])))
        .collect();
    out.sort_by(|a, b| a.1.total_cmp(&b.1));
    out
}
