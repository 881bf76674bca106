//! CSV and VTK exports and the matching readers.
//!
//! Every CSV has a header row and uses `.` as decimal separator. Floats are
//! written in shortest round-trip form, so re-reading is exact.

use std::collections::HashMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::fem::DiscreteObstacleProblem;
use crate::mesh::{Point, TriMesh};

pub const STATE_CSV_HEADER: &str = "node,x,y,q,psi,contact";
pub const CONTROL_CSV_HEADER: &str = "k,theta_k,a_k";
pub const LEVEL_SET_CSV_HEADER: &str = "segment_id,x,y";
pub const PCHIP_CSV_HEADER: &str = "a,u_at_0.3";

/// Numeric CSV table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    /// Parses `text`, requiring each of `required` among the header columns.
    pub fn parse(text: &str, required: &[&str], path: &Path) -> Result<Self> {
        let fail = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| fail(1, "missing header row".into()))?;
        let columns: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
        for name in required {
            if !columns.iter().any(|c| c == name) {
                return Err(fail(1, format!("missing column `{name}`")));
            }
        }
        let mut rows = Vec::new();
        for (i, line) in lines {
            let row: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|e| fail(i + 1, format!("bad number: {e}")))?;
            if row.len() != columns.len() {
                return Err(fail(i + 1, format!("expected {} fields, got {}", columns.len(), row.len())));
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }

    pub fn read(path: &Path, required: &[&str]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, required, path)
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }
}

/// State CSV: one row per node with the state, the nodal obstacle and a
/// 0/1 contact flag.
pub fn state_csv(problem: &DiscreteObstacleProblem, q: &[f64], contact_set: &[usize]) -> String {
    let contact = contact_flags(problem.num_nodes(), contact_set);
    let mut out = format!("{STATE_CSV_HEADER}\n");
    for (i, p) in problem.mesh.nodes.iter().enumerate() {
        let _ = writeln!(out, "{i},{},{},{},{},{}", p[0], p[1], q[i], problem.obstacle[i], contact[i] as u8);
    }
    out
}

fn contact_flags(n: usize, contact_set: &[usize]) -> Vec<bool> {
    let mut flags = vec![false; n];
    for &i in contact_set {
        flags[i] = true;
    }
    flags
}

/// Legacy ASCII VTK unstructured grid with point scalars `y`, `psi` and
/// `contact`.
pub fn state_vtk(problem: &DiscreteObstacleProblem, q: &[f64], contact_set: &[usize]) -> String {
    let mesh = &problem.mesh;
    let n = mesh.num_nodes();
    let t = mesh.num_triangles();
    let mut out = String::from("# vtk DataFile Version 3.0\nobstacle state\nASCII\nDATASET UNSTRUCTURED_GRID\n");
    let _ = writeln!(out, "POINTS {n} double");
    for p in &mesh.nodes {
        let _ = writeln!(out, "{} {} 0", p[0], p[1]);
    }
    let _ = writeln!(out, "CELLS {t} {}", 4 * t);
    for tri in &mesh.triangles {
        let _ = writeln!(out, "3 {} {} {}", tri[0], tri[1], tri[2]);
    }
    let _ = writeln!(out, "CELL_TYPES {t}");
    for _ in 0..t {
        out.push_str("5\n");
    }
    let _ = writeln!(out, "POINT_DATA {n}");
    let mut scalars = |name: &str, kind: &str, values: &mut dyn Iterator<Item = String>| {
        let _ = writeln!(out, "SCALARS {name} {kind} 1\nLOOKUP_TABLE default");
        for v in values {
            out.push_str(&v);
            out.push('\n');
        }
    };
    scalars("y", "double", &mut q.iter().map(|v| v.to_string()));
    scalars("psi", "double", &mut problem.obstacle.iter().map(|v| v.to_string()));
    let contact = contact_flags(n, contact_set);
    scalars("contact", "int", &mut contact.iter().map(|&c| (c as u8).to_string()));
    out
}

/// Point count, triangles and point scalars of a legacy ASCII VTK file
/// written by [`state_vtk`].
#[derive(Debug, Clone, PartialEq)]
pub struct VtkData {
    pub points: Vec<[f64; 3]>,
    pub triangles: Vec<[usize; 3]>,
    pub point_data: HashMap<String, Vec<f64>>,
}

pub fn parse_vtk(text: &str, path: &Path) -> Result<VtkData> {
    let fail = |message: String| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message,
    };
    let mut tokens = text.lines().skip(3).flat_map(str::split_whitespace);
    let mut next = |what: &str| tokens.next().ok_or_else(|| fail(format!("unexpected end while reading {what}")));
    let num = |s: &str| s.parse::<f64>().map_err(|_| fail(format!("bad number {s:?}")));
    let int = |s: &str| s.parse::<usize>().map_err(|_| fail(format!("bad integer {s:?}")));

    if (next("dataset")?, next("dataset")?) != ("DATASET", "UNSTRUCTURED_GRID") {
        return Err(fail("expected DATASET UNSTRUCTURED_GRID".into()));
    }
    let mut data = VtkData {
        points: Vec::new(),
        triangles: Vec::new(),
        point_data: HashMap::new(),
    };
    while let Ok(keyword) = next("keyword") {
        match keyword {
            "POINTS" => {
                let n = int(next("POINTS")?)?;
                next("POINTS")?;
                for _ in 0..n {
                    data.points.push([num(next("point")?)?, num(next("point")?)?, num(next("point")?)?]);
                }
            }
            "CELLS" => {
                let t = int(next("CELLS")?)?;
                next("CELLS")?;
                for _ in 0..t {
                    if int(next("cell")?)? != 3 {
                        return Err(fail("only triangles are supported".into()));
                    }
                    data.triangles.push([int(next("cell")?)?, int(next("cell")?)?, int(next("cell")?)?]);
                }
            }
            "CELL_TYPES" => {
                let t = int(next("CELL_TYPES")?)?;
                for _ in 0..t {
                    next("cell type")?;
                }
            }
            "POINT_DATA" => {
                int(next("POINT_DATA")?)?;
            }
            "SCALARS" => {
                let name = next("scalar name")?.to_string();
                next("scalar type")?;
                next("components")?;
                if next("lookup")? != "LOOKUP_TABLE" {
                    return Err(fail("expected LOOKUP_TABLE".into()));
                }
                next("lookup table")?;
                let values = (0..data.points.len())
                    .map(|_| num(next("scalar value")?))
                    .collect::<Result<Vec<_>>>()?;
                data.point_data.insert(name, values);
            }
            other => return Err(fail(format!("unexpected keyword {other:?}"))),
        }
    }
    Ok(data)
}

/// Control CSV with the knot angles `θ_k = 2πk/n`.
pub fn control_csv(a: &[f64]) -> String {
    let n = a.len();
    let mut out = format!("{CONTROL_CSV_HEADER}\n");
    for (k, v) in a.iter().enumerate() {
        let _ = writeln!(out, "{k},{},{v}", TAU * k as f64 / n as f64);
    }
    out
}

/// Control coefficients from a control CSV, checking the row order.
pub fn read_control_csv(path: &Path) -> Result<Vec<f64>> {
    let table = CsvTable::read(path, &["k", "a_k"])?;
    let k = table.column("k").expect("required");
    if k.iter().enumerate().any(|(i, &v)| v != i as f64) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 0,
            message: "rows must list k = 0, 1, 2, ... in order".into(),
        });
    }
    Ok(table.column("a_k").expect("required"))
}

/// Zero level set of the P1 field `q` as polylines.
///
/// A crossing point is placed by linear interpolation on every edge with
/// one positive and one non-positive endpoint value. Each triangle with two
/// crossings contributes a segment; segments sharing an edge are chained, and closed curves repeat
/// their first point at the end.
pub fn zero_level_set(mesh: &TriMesh, q: &[f64]) -> Vec<Vec<Point>> {
    let positive = |i: usize| q[i] > 0.0;
    let key = |i: usize, j: usize| (i.min(j), i.max(j));
    let crossing = |i: usize, j: usize| -> Point {
        let (i, j) = key(i, j);
        let t = q[i] / (q[i] - q[j]);
        let (a, b) = (mesh.nodes[i], mesh.nodes[j]);
        [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
    };

    let mut segments: Vec<[(usize, usize); 2]> = Vec::new();
    for tri in &mesh.triangles {
        let cut: Vec<(usize, usize)> = (0..3)
            .map(|m| (tri[m], tri[(m + 1) % 3]))
            .filter(|&(i, j)| positive(i) != positive(j))
            .map(|(i, j)| key(i, j))
            .collect();
        if let [e0, e1] = cut[..] {
            segments.push([e0, e1]);
        }
    }

    let mut by_edge: HashMap<(usize, usize), Vec<usize>> = HashMap::new();
    for (s, seg) in segments.iter().enumerate() {
        for e in seg {
            by_edge.entry(*e).or_default().push(s);
        }
    }
    let mut used = vec![false; segments.len()];
    let mut polylines = Vec::new();
    // Open chains start at edges with a single segment, so visit those
    // first; remaining segments form closed loops.
    let mut starts: Vec<(usize, (usize, usize))> = Vec::new();
    for (s, seg) in segments.iter().enumerate() {
        for e in seg {
            if by_edge[e].len() == 1 {
                starts.push((s, *e));
            }
        }
    }
    starts.extend(segments.iter().enumerate().map(|(s, seg)| (s, seg[0])));
    for (s0, e0) in starts {
        if used[s0] {
            continue;
        }
        let mut edges = vec![e0];
        let (mut s, mut e) = (s0, e0);
        loop {
            used[s] = true;
            let seg = segments[s];
            let other = if seg[0] == e { seg[1] } else { seg[0] };
            edges.push(other);
            match by_edge[&other].iter().find(|&&t| !used[t]) {
                Some(&t) => {
                    s = t;
                    e = other;
                }
                None => break,
            }
        }
        polylines.push(edges.into_iter().map(|(i, j)| crossing(i, j)).collect());
    }
    polylines
}

pub fn level_set_csv(polylines: &[Vec<Point>]) -> String {
    let mut out = format!("{LEVEL_SET_CSV_HEADER}\n");
    for (id, line) in polylines.iter().enumerate() {
        for p in line {
            let _ = writeln!(out, "{id},{},{}", p[0], p[1]);
        }
    }
    out
}

pub fn pchip_csv(samples: &[(f64, f64)]) -> String {
    let mut out = format!("{PCHIP_CSV_HEADER}\n");
    for (a, u) in samples {
        let _ = writeln!(out, "{a},{u}");
    }
    out
}

/// Writes `contents` to `path`, creating parent directories.
pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
