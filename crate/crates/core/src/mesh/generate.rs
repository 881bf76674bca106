use std::f64::consts::TAU;

use spade::{
    AngleLimit, ConstrainedDelaunayTriangulation, Point2, RefinementParameters, Triangulation,
};

use super::{point_in_polygon, polar_angle, Point, TriMesh};
use crate::error::{Error, Result};

type Cdt = ConstrainedDelaunayTriangulation<Point2<f64>>;

// Refinement targets a slightly stricter angle than the 20° contract so that
// faces next to kept constraint edges still clear it.
const REFINE_ANGLE_DEG: f64 = 25.0;
const MIN_ANGLE_DEG: f64 = 20.0;

fn segments_cross(p1: Point, p2: Point, q1: Point, q2: Point) -> bool {
    let o = |a: Point, b: Point, c: Point| {
        robust::orient2d(
            robust::Coord { x: a[0], y: a[1] },
            robust::Coord { x: b[0], y: b[1] },
            robust::Coord { x: c[0], y: c[1] },
        )
    };
    let d1 = o(q1, q2, p1);
    let d2 = o(q1, q2, p2);
    let d3 = o(p1, p2, q1);
    let d4 = o(p1, p2, q2);
    ((d1 > 0.0 && d2 < 0.0) || (d1 < 0.0 && d2 > 0.0))
        && ((d3 > 0.0 && d4 < 0.0) || (d3 < 0.0 && d4 > 0.0))
}

fn check_polygon(radius: f64, h: f64, poly: &[Point]) -> Result<()> {
    let bad = |msg: String| Err(Error::InvalidInput(msg));
    if poly.len() < 3 {
        return bad(format!("target polygon needs at least 3 vertices, got {}", poly.len()));
    }
    if poly.iter().flatten().any(|c| !c.is_finite()) {
        return bad("target polygon has non-finite coordinates".into());
    }
    let n = poly.len();
    for (i, p) in poly.iter().enumerate() {
        if p[0].hypot(p[1]) >= radius {
            return bad(format!(
                "target polygon vertex {i} ({}, {}) touches or lies outside the circle of radius {radius}",
                p[0], p[1]
            ));
        }
    }
    for i in 0..n {
        let (a, b) = (poly[i], poly[(i + 1) % n]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        if len == 0.0 {
            return bad(format!("target polygon has a repeated vertex at index {i}"));
        }
        // Each edge chain needs at least 3 nodes, i.e. 2 segments of length <= h.
        if (len / h).ceil() < 2.0 {
            return bad(format!(
                "h = {h} cannot resolve target polygon edge {i} of length {len}"
            ));
        }
        for j in i + 1..n {
            if j == i + 1 || (i == 0 && j == n - 1) {
                continue;
            }
            if segments_cross(a, b, poly[j], poly[(j + 1) % n]) {
                return bad(format!("target polygon edges {i} and {j} intersect"));
            }
        }
    }
    Ok(())
}

/// Generates a triangulation of the disk `B(0, radius)` with nominal edge
/// length `h` whose edges contain the boundary of `omega0`.
///
/// The circle carries `round(2πR/h)` equally spaced nodes placed exactly on
/// it; each polygon edge is split into equal segments no longer than `h`.
/// Both are inserted as constraints into a constrained Delaunay
/// triangulation, which is then refined with an area bound matching `h`
/// and a minimum-angle bound while keeping constraint edges intact.
pub fn generate_disk_mesh(radius: f64, h: f64, omega0: &[Point]) -> Result<TriMesh> {
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::InvalidInput(format!("radius must be positive, got {radius}")));
    }
    if !(h.is_finite() && h > 0.0 && h < radius) {
        return Err(Error::InvalidInput(format!(
            "mesh size must satisfy 0 < h < R, got h = {h}, R = {radius}"
        )));
    }
    check_polygon(radius, h, omega0)?;

    let m = ((TAU * radius / h).round() as usize).max(3);
    let mut points: Vec<Point> = (0..m)
        .map(|k| {
            let t = TAU * k as f64 / m as f64;
            [radius * t.cos(), radius * t.sin()]
        })
        .collect();
    let mut edges: Vec<[usize; 2]> = (0..m).map(|k| [k, (k + 1) % m]).collect();

    let np = omega0.len();
    let first_poly = points.len();
    for i in 0..np {
        let (a, b) = (omega0[i], omega0[(i + 1) % np]);
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        let segs = (len / h).ceil() as usize;
        for s in 0..segs {
            let t = s as f64 / segs as f64;
            points.push([a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    let poly_nodes = points.len() - first_poly;
    for k in 0..poly_nodes {
        edges.push([first_poly + k, first_poly + (k + 1) % poly_nodes]);
    }

    let vertices: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let mut cdt = Cdt::bulk_load_cdt(vertices, edges)
        .map_err(|e| Error::MeshGeneration(format!("constrained triangulation: {e:?}")))?;
    if cdt.num_vertices() != points.len() {
        return Err(Error::MeshGeneration("duplicate input vertices".into()));
    }

    // Refined triangles end up well below the area bound; 1.5x the
    // equilateral area gives a mean edge length close to h.
    let target_area = 1.5 * 3f64.sqrt() / 4.0 * h * h;
    let params = RefinementParameters::<f64>::new()
        .with_angle_limit(AngleLimit::from_deg(REFINE_ANGLE_DEG))
        .with_max_allowed_area(target_area)
        .keep_constraint_edges()
        .with_max_additional_vertices(50 * points.len() + (20.0 * radius * radius / target_area) as usize);
    let result = cdt.refine(params);
    if !result.refinement_complete {
        return Err(Error::MeshGeneration("refinement ran out of vertices".into()));
    }

    let nodes: Vec<Point> = cdt.vertices().map(|v| [v.position().x, v.position().y]).collect();
    for (k, p) in points.iter().enumerate() {
        if nodes[k] != *p {
            return Err(Error::MeshGeneration(format!("input vertex {k} was reordered")));
        }
    }
    let triangles: Vec<[usize; 3]> = cdt
        .inner_faces()
        .map(|f| {
            let [a, b, c] = f.vertices();
            [a.fix().index(), b.fix().index(), c.fix().index()]
        })
        .collect();

    let boundary_nodes: Vec<usize> = (0..m).collect();
    let boundary_angles = boundary_nodes.iter().map(|&i| polar_angle(nodes[i])).collect();
    let mut mesh = TriMesh {
        nodes,
        triangles,
        boundary_nodes,
        boundary_angles,
        omega0_triangles: Vec::new(),
        nominal_h: Some(h),
    };
    for t in 0..mesh.num_triangles() {
        if mesh.area(t) < 0.0 {
            mesh.triangles[t].swap(1, 2);
        }
    }
    mesh.omega0_triangles = (0..mesh.num_triangles())
        .map(|t| point_in_polygon(mesh.centroid(t), omega0))
        .collect();

    mesh.validate()
        .map_err(|e| Error::MeshGeneration(format!("generated mesh is invalid: {e}")))?;
    let min_angle = mesh.min_angle_deg();
    if min_angle < MIN_ANGLE_DEG {
        return Err(Error::MeshGeneration(format!(
            "minimum angle {min_angle:.2}° below {MIN_ANGLE_DEG}°"
        )));
    }
    Ok(mesh)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn target() -> Vec<Point> {
        vec![[-1.0, 0.0], [0.5, 0.75], [0.5, -1.5]]
    }

    #[test]
    fn rejects_polygon_touching_circle() {
        let poly = vec![[-1.0, 0.0], [1.75, 0.0], [0.5, -1.0]];
        assert!(matches!(generate_disk_mesh(1.75, 0.1, &poly), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_unresolvable_h() {
        assert!(matches!(generate_disk_mesh(1.75, 1.7, &target()), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(generate_disk_mesh(1.75, 0.0, &target()).is_err());
        assert!(generate_disk_mesh(1.75, -0.1, &target()).is_err());
        assert!(generate_disk_mesh(-1.0, 0.1, &target()).is_err());
    }

    #[test]
    fn rejects_self_intersecting_polygon() {
        let bowtie = vec![[-0.5, -0.5], [0.5, 0.5], [0.5, -0.5], [-0.5, 0.5]];
        assert!(matches!(generate_disk_mesh(1.75, 0.1, &bowtie), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn coarse_mesh_satisfies_invariants() {
        let mesh = generate_disk_mesh(1.75, 0.2, &target()).unwrap();
        mesh.validate().unwrap();
        assert!(mesh.resolves_polygon(&target()));
        assert!(mesh.min_angle_deg() >= 20.0);
        assert_eq!(mesh.boundary_nodes.len(), 55);
    }
}
