//! Plain-text mesh format.
//!
//! ```text
//! V T
//! x y        (V lines)
//! i j k      (T lines, 0-based vertex indices)
//! ```

use std::fs;
use std::io::Write;
use std::path::Path;

use super::TriMesh;
use crate::error::{Error, Result};

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    writeln!(out, "{} {}", mesh.num_vertices(), mesh.num_triangles())?;
    for p in mesh.vertices() {
        writeln!(out, "{:.16e} {:.16e}", p[0], p[1])?;
    }
    for t in mesh.triangles() {
        writeln!(out, "{} {} {}", t[0], t[1], t[2])?;
    }
    out.flush()?;
    Ok(())
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    read_mesh(&text, path)
}

/// Parse mesh text; `origin` is only used in error messages.
pub fn read_mesh(text: &str, origin: &Path) -> Result<TriMesh> {
    let err = |line: usize, msg: String| Error::Format { path: origin.to_path_buf(), line, msg };
    let mut lines =
        text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (ln, header) = lines.next().ok_or_else(|| err(1, "empty mesh file".into()))?;
    let counts = parse_fields::<usize>(header, 2).map_err(|m| err(ln, m))?;
    let (nv, nt) = (counts[0], counts[1]);

    let mut vertices = Vec::with_capacity(nv);
    for k in 0..nv {
        let (ln, l) = lines.next().ok_or_else(|| err(ln, format!("expected {nv} vertices, found {k}")))?;
        let xy = parse_fields::<f64>(l, 2).map_err(|m| err(ln, m))?;
        vertices.push([xy[0], xy[1]]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for k in 0..nt {
        let (ln, l) = lines.next().ok_or_else(|| err(ln, format!("expected {nt} triangles, found {k}")))?;
        let ijk = parse_fields::<usize>(l, 3).map_err(|m| err(ln, m))?;
        triangles.push([ijk[0], ijk[1], ijk[2]]);
    }
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content after the last triangle".into()));
    }
    TriMesh::new(vertices, triangles)
}

fn parse_fields<T: std::str::FromStr>(line: &str, n: usize) -> std::result::Result<Vec<T>, String> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() != n {
        return Err(format!("expected {n} fields, found {}", fields.len()));
    }
    fields.iter().map(|f| f.parse::<T>().map_err(|_| format!("cannot parse `{f}`"))).collect()
}
