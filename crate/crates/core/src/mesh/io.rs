//! ASCII mesh format:
//!
//! ```text
//! obsmesh 1
//! N E_b T
//! x y                 (N lines)
//! b                   (E_b lines, boundary nodes in angular order)
//! i j k flag          (T lines, flag 1 = inside the target region)
//! ```
//!
//! Indices are 0-based; coordinates are written with 17 significant digits.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::{polar_angle, TriMesh};
use crate::error::{Error, Result};

const MAGIC: &str = "obsmesh 1";

pub fn write_mesh<W: Write>(mesh: &TriMesh, mut w: W) -> std::io::Result<()> {
    writeln!(w, "{MAGIC}")?;
    writeln!(
        w,
        "{} {} {}",
        mesh.num_nodes(),
        mesh.boundary_nodes.len(),
        mesh.num_triangles()
    )?;
    for p in &mesh.nodes {
        writeln!(w, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    for b in &mesh.boundary_nodes {
        writeln!(w, "{b}")?;
    }
    for (tri, &flag) in mesh.triangles.iter().zip(&mesh.omega0_triangles) {
        writeln!(w, "{} {} {} {}", tri[0], tri[1], tri[2], u8::from(flag))?;
    }
    Ok(())
}

pub fn save_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_mesh(mesh, &mut w).map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

struct Lines<R> {
    inner: std::iter::Enumerate<std::io::Lines<R>>,
    path: PathBuf,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.clone(),
            line: self.line,
            message: message.into(),
        }
    }

    fn next_line(&mut self, what: &str) -> Result<String> {
        for (i, line) in self.inner.by_ref() {
            self.line = i + 1;
            let line = line.map_err(|e| Error::io(&self.path, e))?;
            if !line.trim().is_empty() {
                return Ok(line);
            }
        }
        self.line += 1;
        Err(self.err(format!("unexpected end of file, expected {what}")))
    }

    fn fields<T: FromStr>(&mut self, what: &str, count: usize) -> Result<Vec<T>> {
        let line = self.next_line(what)?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != count {
            return Err(self.err(format!(
                "expected {count} fields for {what}, found {}",
                parts.len()
            )));
        }
        parts
            .iter()
            .map(|s| {
                s.parse::<T>()
                    .map_err(|_| self.err(format!("cannot parse {s:?} in {what}")))
            })
            .collect()
    }
}

/// Reads a mesh; `path` is used only in error messages.
pub fn read_mesh<R: BufRead>(reader: R, path: impl Into<PathBuf>) -> Result<TriMesh> {
    let mut lines = Lines {
        inner: reader.lines().enumerate(),
        path: path.into(),
        line: 0,
    };
    let header = lines.next_line("header")?;
    if header.trim() != MAGIC {
        return Err(lines.err(format!("expected header {MAGIC:?}, found {:?}", header.trim())));
    }
    let counts: Vec<usize> = lines.fields("counts N E_b T", 3)?;
    let (n, nb, nt) = (counts[0], counts[1], counts[2]);

    let mut nodes = Vec::with_capacity(n);
    for _ in 0..n {
        let xy: Vec<f64> = lines.fields("node coordinates", 2)?;
        if !xy.iter().all(|v| v.is_finite()) {
            return Err(lines.err("non-finite coordinate"));
        }
        nodes.push([xy[0], xy[1]]);
    }
    let mut boundary_nodes = Vec::with_capacity(nb);
    for _ in 0..nb {
        let b: Vec<usize> = lines.fields("boundary node index", 1)?;
        if b[0] >= n {
            return Err(lines.err(format!("boundary node index {} out of range (N = {n})", b[0])));
        }
        boundary_nodes.push(b[0]);
    }
    let mut triangles = Vec::with_capacity(nt);
    let mut omega0_triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let t: Vec<usize> = lines.fields("triangle", 4)?;
        if let Some(bad) = t[..3].iter().find(|&&i| i >= n) {
            return Err(lines.err(format!("triangle node index {bad} out of range (N = {n})")));
        }
        if t[3] > 1 {
            return Err(lines.err(format!("triangle flag must be 0 or 1, found {}", t[3])));
        }
        triangles.push([t[0], t[1], t[2]]);
        omega0_triangles.push(t[3] == 1);
    }
    while let Some((i, line)) = lines.inner.next() {
        let line = line.map_err(|e| Error::io(&lines.path, e))?;
        if !line.trim().is_empty() {
            lines.line = i + 1;
            return Err(lines.err("trailing content after the last triangle"));
        }
    }

    let boundary_angles = boundary_nodes.iter().map(|&i| polar_angle(nodes[i])).collect();
    let mesh = TriMesh {
        nodes,
        triangles,
        boundary_nodes,
        boundary_angles,
        omega0_triangles,
        nominal_h: None,
    };
    mesh.validate()?;
    Ok(mesh)
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_mesh(BufReader::new(file), path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_disk_mesh;

    fn parse(text: &str) -> Result<TriMesh> {
        read_mesh(text.as_bytes(), "test.obsmesh")
    }

    #[test]
    fn round_trip_is_bitwise() {
        let poly = [[-1.0, 0.0], [0.5, 0.75], [0.5, -1.5]];
        let mesh = generate_disk_mesh(1.75, 0.2, &poly).unwrap();
        let mut buf = Vec::new();
        write_mesh(&mesh, &mut buf).unwrap();
        let back = parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back.num_nodes(), mesh.num_nodes());
        for (a, b) in back.nodes.iter().zip(&mesh.nodes) {
            assert_eq!(a[0].to_bits(), b[0].to_bits());
            assert_eq!(a[1].to_bits(), b[1].to_bits());
        }
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.boundary_nodes, mesh.boundary_nodes);
        assert_eq!(back.boundary_angles, mesh.boundary_angles);
        assert_eq!(back.omega0_triangles, mesh.omega0_triangles);
    }

    #[test]
    fn empty_file_is_a_parse_error() {
        match parse("") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 1),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn out_of_range_triangle_index_is_rejected() {
        let text = "obsmesh 1\n4 3 1\n1 0\n0 1\n-1 0\n0 0\n0\n1\n2\n0 1 4 0\n";
        match parse(text) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 10);
                assert!(message.contains("out of range"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_number_reports_line() {
        let text = "obsmesh 1\n3 3 1\n1 0\n0 x\n";
        match parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
