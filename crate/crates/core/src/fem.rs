//! P1 finite element assembly on a [`TriMesh`] and the discrete obstacle
//! problem data built from it.

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};
use crate::sparse::{CsrMatrix, MaskedCholesky};

const MIN_TRIANGLE_AREA: f64 = 1e-14;

/// Element stiffness `∫_T ∇φ_a·∇φ_b` for the triangle with vertices `p`.
///
/// With `e_a` the edge opposite vertex `a`, `∇φ_a = rot(e_a) / (2|T|)`, so the
/// entry is `e_a·e_b / (4|T|)`.
pub fn element_stiffness(p: [Point; 3]) -> Option<[[f64; 3]; 3]> {
    let area = crate::mesh::signed_area(p[0], p[1], p[2]);
    if area <= MIN_TRIANGLE_AREA {
        return None;
    }
    let edge = |a: usize| {
        let (s, t) = (p[(a + 1) % 3], p[(a + 2) % 3]);
        [t[0] - s[0], t[1] - s[1]]
    };
    let e = [edge(0), edge(1), edge(2)];
    let mut k = [[0.0; 3]; 3];
    for a in 0..3 {
        for b in 0..3 {
            k[a][b] = (e[a][0] * e[b][0] + e[a][1] * e[b][1]) / (4.0 * area);
        }
    }
    Some(k)
}

fn node_pattern(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut rows = vec![Vec::new(); mesh.num_nodes()];
    for tri in &mesh.triangles {
        for &a in tri {
            rows[a].extend_from_slice(tri);
        }
    }
    rows
}

/// Assembles the P1 Laplacian stiffness matrix.
pub fn assemble_stiffness(mesh: &TriMesh) -> Result<CsrMatrix> {
    let mut k = CsrMatrix::from_pattern(mesh.num_nodes(), node_pattern(mesh));
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let ke = element_stiffness(mesh.vertices(t)).ok_or(Error::DegenerateTriangle {
            triangle: t,
            area: mesh.area(t),
        })?;
        for a in 0..3 {
            for b in 0..3 {
                k.add(tri[a], tri[b], ke[a][b]);
            }
        }
    }
    Ok(k)
}

/// Midpoints of the three edges of triangle `t`, the nodes of the
/// edge-midpoint quadrature rule. Midpoint `m` lies on the edge from local
/// vertex `m` to local vertex `m + 1`.
pub fn edge_midpoints(mesh: &TriMesh, t: usize) -> [Point; 3] {
    let v = mesh.vertices(t);
    std::array::from_fn(|m| {
        let (a, b) = (v[m], v[(m + 1) % 3]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    })
}

/// Load vector `∫ f φ_i` by the 3-point edge-midpoint rule, exact for
/// integrands of degree 2.
pub fn assemble_load(mesh: &TriMesh, f: impl Fn(Point) -> f64) -> Vec<f64> {
    let mut load = vec![0.0; mesh.num_nodes()];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let w = mesh.area(t) / 3.0;
        for (m, x) in edge_midpoints(mesh, t).into_iter().enumerate() {
            // φ equals 1/2 at the midpoint for both endpoints of the edge.
            let fx = 0.5 * w * f(x);
            load[tri[m]] += fx;
            load[tri[(m + 1) % 3]] += fx;
        }
    }
    load
}

/// Nodal interpolant `v_i = g(x_i)`.
pub fn interpolate_nodal(mesh: &TriMesh, g: impl Fn(Point) -> f64) -> Vec<f64> {
    mesh.nodes.iter().map(|&p| g(p)).collect()
}

/// Degree-5 seven-point rule on the reference triangle: barycentric
/// coordinates and weights summing to one.
fn dunavant7() -> [([f64; 3], f64); 7] {
    let s = 15f64.sqrt();
    let (a1, b1, w1) = ((9.0 - 2.0 * s) / 21.0, (6.0 + s) / 21.0, (155.0 + s) / 1200.0);
    let (a2, b2, w2) = ((9.0 + 2.0 * s) / 21.0, (6.0 - s) / 21.0, (155.0 - s) / 1200.0);
    [
        ([1.0 / 3.0; 3], 9.0 / 40.0),
        ([a1, b1, b1], w1),
        ([b1, a1, b1], w1),
        ([b1, b1, a1], w1),
        ([a2, b2, b2], w2),
        ([b2, a2, b2], w2),
        ([b2, b2, a2], w2),
    ]
}

/// `‖v_h − exact‖_{L²}` over the mesh, with `v_h` the P1 field with nodal
/// values `nodal`.
pub fn l2_error(mesh: &TriMesh, nodal: &[f64], exact: impl Fn(Point) -> f64) -> f64 {
    let rule = dunavant7();
    let mut sum = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let v = mesh.vertices(t);
        let area = mesh.area(t);
        for (bary, w) in &rule {
            let x = [
                bary[0] * v[0][0] + bary[1] * v[1][0] + bary[2] * v[2][0],
                bary[0] * v[0][1] + bary[1] * v[1][1] + bary[2] * v[2][1],
            ];
            let vh: f64 = (0..3).map(|a| bary[a] * nodal[tri[a]]).sum();
            sum += w * area * (vh - exact(x)).powi(2);
        }
    }
    sum.sqrt()
}

/// Stiffness, load and nodal obstacle of the discrete obstacle problem,
/// together with the Dirichlet boundary and a symbolic factorization of
/// the stiffness pattern.
#[derive(Debug, Clone)]
pub struct DiscreteObstacleProblem {
    pub mesh: TriMesh,
    pub stiffness: CsrMatrix,
    pub load: Vec<f64>,
    pub obstacle: Vec<f64>,
    /// Boundary nodes with their polar angles, in angular order.
    pub dirichlet: Vec<(usize, f64)>,
    boundary_mask: Vec<bool>,
    cholesky: MaskedCholesky,
}

impl DiscreteObstacleProblem {
    /// Assembles the problem for load density `f` and obstacle `psi`.
    pub fn new(
        mesh: TriMesh,
        f: impl Fn(Point) -> f64,
        psi: impl Fn(Point) -> f64,
    ) -> Result<Self> {
        let stiffness = assemble_stiffness(&mesh)?;
        let load = assemble_load(&mesh, f);
        let obstacle = interpolate_nodal(&mesh, psi);
        let cholesky = MaskedCholesky::new(&stiffness)?;
        let dirichlet = mesh.boundary_parameterization();
        let boundary_mask = mesh.boundary_mask();
        Ok(Self {
            mesh,
            stiffness,
            load,
            obstacle,
            dirichlet,
            boundary_mask,
            cholesky,
        })
    }

    /// Same problem with a different nodal obstacle.
    pub fn with_obstacle(&self, obstacle: Vec<f64>) -> Self {
        assert_eq!(obstacle.len(), self.num_nodes());
        Self {
            obstacle,
            ..self.clone()
        }
    }

    /// Same problem with a different load vector.
    pub fn with_load(&self, load: Vec<f64>) -> Self {
        assert_eq!(load.len(), self.num_nodes());
        Self {
            load,
            ..self.clone()
        }
    }

    pub fn num_nodes(&self) -> usize {
        self.mesh.num_nodes()
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary_mask
    }

    /// Boundary angles in Dirichlet order.
    pub fn boundary_thetas(&self) -> Vec<f64> {
        self.dirichlet.iter().map(|d| d.1).collect()
    }

    pub(crate) fn cholesky(&self) -> &MaskedCholesky {
        &self.cholesky
    }

    /// Full nodal vector holding `boundary_values` (Dirichlet order) on the
    /// boundary and zero elsewhere.
    pub fn scatter_boundary(&self, boundary_values: &[f64]) -> Vec<f64> {
        assert_eq!(boundary_values.len(), self.dirichlet.len());
        let mut v = vec![0.0; self.num_nodes()];
        for (&(i, _), &u) in self.dirichlet.iter().zip(boundary_values) {
            v[i] = u;
        }
        v
    }

    /// `Π(q) = ½ qᵀKq − fᵀq`.
    pub fn energy(&self, q: &[f64]) -> f64 {
        0.5 * self.stiffness.quadratic_form(q) - self.load.iter().zip(q).map(|(f, x)| f * x).sum::<f64>()
    }

    /// Residual `Kq − f`.
    pub fn residual(&self, q: &[f64]) -> Vec<f64> {
        let mut r = self.stiffness.matvec(q);
        for (ri, fi) in r.iter_mut().zip(&self.load) {
            *ri -= fi;
        }
        r
    }

    /// Solves the Dirichlet problem ignoring the obstacle:
    /// `K_FF y_F = f_F − K_FD u_D` on the interior nodes `F`.
    pub fn unconstrained_dirichlet_solve(&self, boundary_values: &[f64]) -> Result<Vec<f64>> {
        let factor = self.cholesky.factor(&self.stiffness, &self.boundary_mask)?;
        let values = self.scatter_boundary(boundary_values);
        Ok(factor.solve_dirichlet(&self.stiffness, &self.load, &values))
    }
}
