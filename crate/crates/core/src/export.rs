//! Legacy ASCII VTK and CSV writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::mesh::TriMesh;

/// A named field attached to a mesh.
#[derive(Debug, Clone, Copy)]
pub enum VtkField<'a> {
    Point(&'a str, &'a [f64]),
    Cell(&'a str, &'a [f64]),
    CellVector(&'a str, &'a [[f64; 2]]),
}

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn vtk_name(name: &str) -> String {
    name.chars().map(|c| if c.is_whitespace() { '_' } else { c }).collect()
}

pub fn write_vtk(path: impl AsRef<Path>, mesh: &TriMesh, title: &str, fields: &[VtkField]) -> Result<()> {
    let (nv, nt) = (mesh.num_vertices(), mesh.num_triangles());
    for f in fields {
        let (expected, got) = match f {
            VtkField::Point(_, v) => (nv, v.len()),
            VtkField::Cell(_, v) => (nt, v.len()),
            VtkField::CellVector(_, v) => (nt, v.len()),
        };
        if expected != got {
            return Err(Error::SizeMismatch { expected, got });
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "# vtk DataFile Version 3.0")?;
    writeln!(w, "{}", title.lines().next().unwrap_or("").chars().take(255).collect::<String>())?;
    writeln!(w, "ASCII")?;
    writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
    writeln!(w, "POINTS {nv} double")?;
    for p in mesh.vertices() {
        writeln!(w, "{} {} 0", fmt_f64(p[0]), fmt_f64(p[1]))?;
    }
    writeln!(w, "CELLS {nt} {}", 4 * nt)?;
    for t in mesh.triangles() {
        writeln!(w, "3 {} {} {}", t[0], t[1], t[2])?;
    }
    writeln!(w, "CELL_TYPES {nt}")?;
    for _ in 0..nt {
        writeln!(w, "5")?;
    }
    let points: Vec<_> = fields.iter().filter(|f| matches!(f, VtkField::Point(..))).collect();
    if !points.is_empty() {
        writeln!(w, "POINT_DATA {nv}")?;
        for f in points {
            if let VtkField::Point(name, v) = f {
                writeln!(w, "SCALARS {} double 1", vtk_name(name))?;
                writeln!(w, "LOOKUP_TABLE default")?;
                for x in v.iter() {
                    writeln!(w, "{}", fmt_f64(*x))?;
                }
            }
        }
    }
    let cells: Vec<_> = fields.iter().filter(|f| !matches!(f, VtkField::Point(..))).collect();
    if !cells.is_empty() {
        writeln!(w, "CELL_DATA {nt}")?;
        for f in cells {
            match f {
                VtkField::Cell(name, v) => {
                    writeln!(w, "SCALARS {} double 1", vtk_name(name))?;
                    writeln!(w, "LOOKUP_TABLE default")?;
                    for x in v.iter() {
                        writeln!(w, "{}", fmt_f64(*x))?;
                    }
                }
                VtkField::CellVector(name, v) => {
                    writeln!(w, "VECTORS {} double", vtk_name(name))?;
                    for x in v.iter() {
                        writeln!(w, "{} {} 0", fmt_f64(x[0]), fmt_f64(x[1]))?;
                    }
                }
                VtkField::Point(..) => unreachable!(),
            }
        }
    }
    w.flush()?;
    Ok(())
}

/// Write a header and rows of numbers. `None` entries are left empty.
pub fn write_csv(path: impl AsRef<Path>, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_csv_to(&mut w, header, rows)?;
    w.flush()?;
    Ok(())
}

pub fn write_csv_to(w: &mut impl Write, header: &[&str], rows: &[Vec<Option<f64>>]) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        if row.len() != header.len() {
            return Err(Error::SizeMismatch { expected: header.len(), got: row.len() });
        }
        let cells: Vec<String> = row.iter().map(|c| c.map(fmt_f64).unwrap_or_default()).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}
