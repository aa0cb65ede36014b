use std::f64::consts::PI;

use super::{Point, TriMesh};
use crate::error::{Error, Result};

/// Number of intervals needed to cover `len` with pieces no longer than `h`.
/// The small slack keeps exact ratios such as 2 / 0.02 from rounding up.
fn intervals(len: f64, h: f64) -> usize {
    ((len / h) - 1e-9).ceil().max(1.0) as usize
}

/// Structured mesh of a rectangle: `⌈side/h⌉` cells per axis, each cut along
/// the lower-left to upper-right diagonal.
pub fn generate_square_mesh(xmin: f64, xmax: f64, ymin: f64, ymax: f64, h: f64) -> Result<TriMesh> {
    if !(xmax > xmin) || !(ymax > ymin) {
        return Err(Error::InvalidArgument(format!("empty rectangle [{xmin}, {xmax}] x [{ymin}, {ymax}]")));
    }
    let min_side = (xmax - xmin).min(ymax - ymin);
    if !(h > 0.0) || !(h < min_side) {
        return Err(Error::InvalidArgument(format!("mesh size h = {h} must lie in (0, {min_side})")));
    }
    let nx = intervals(xmax - xmin, h);
    let ny = intervals(ymax - ymin, h);
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { ymax } else { ymin + (ymax - ymin) * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { xmax } else { xmin + (xmax - xmin) * i as f64 / nx as f64 };
            vertices.push([x, y]);
        }
    }
    let idx = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (idx(i, j), idx(i + 1, j), idx(i, j + 1), idx(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Mesh of the polygon inscribed in the disk `|x| < radius`.
///
/// Ring `k` (k = 1..K, K = ⌈radius/h⌉) sits at radius `k·radius/K` and carries
/// `⌈2πk·radius/(K·h)⌉` equally spaced vertices; consecutive rings are zipped
/// together by angle. Odd rings are rotated by half a step.
pub fn generate_disk_mesh(radius: f64, h: f64) -> Result<TriMesh> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("disk radius {radius} must be positive")));
    }
    if !(h > 0.0) || !(h < radius) {
        return Err(Error::InvalidArgument(format!("mesh size h = {h} must lie in (0, {radius})")));
    }
    let rings = intervals(radius, h);
    let mut vertices: Vec<Point> = vec![[0.0, 0.0]];
    // (first vertex index, vertex count, angular offset in steps) per ring
    let mut layout = vec![(0usize, 1usize, 0.0f64)];
    for k in 1..=rings {
        let r = if k == rings { radius } else { radius * k as f64 / rings as f64 };
        let n = intervals(2.0 * PI * r, h).max(3);
        let offset = if k % 2 == 1 { 0.5 } else { 0.0 };
        layout.push((vertices.len(), n, offset));
        for i in 0..n {
            let theta = 2.0 * PI * (i as f64 + offset) / n as f64;
            vertices.push([r * theta.cos(), r * theta.sin()]);
        }
    }

    let mut triangles = Vec::new();
    let (_, n1, _) = layout[1];
    for i in 0..n1 {
        triangles.push([0, 1 + i, 1 + (i + 1) % n1]);
    }
    for k in 1..rings {
        let (sa, na, oa) = layout[k];
        let (sb, nb, ob) = layout[k + 1];
        let angle_a = |i: usize| (i as f64 + oa) / na as f64;
        let angle_b = |j: usize| (j as f64 + ob) / nb as f64;
        let (mut i, mut j) = (0usize, 0usize);
        while i < na || j < nb {
            let a = sa + i % na;
            let b = sb + j % nb;
            let advance_outer = j < nb && (i == na || angle_b(j + 1) <= angle_a(i + 1));
            if advance_outer {
                triangles.push([a, b, sb + (j + 1) % nb]);
                j += 1;
            } else {
                triangles.push([a, b, sa + (i + 1) % na]);
                i += 1;
            }
        }
    }
    TriMesh::new(vertices, triangles)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_edge_topology;

    #[test]
    fn square_counts() {
        let m = generate_square_mesh(-1.0, 1.0, -1.0, 1.0, 1.0).unwrap();
        assert_eq!((m.num_triangles(), m.num_vertices()), (8, 9));
        let m = generate_square_mesh(-1.0, 1.0, -1.0, 1.0, 0.02).unwrap();
        assert_eq!((m.num_triangles(), m.num_vertices()), (20000, 10201));
    }

    #[test]
    fn square_rejects_bad_h() {
        assert!(matches!(generate_square_mesh(0.0, 1.0, 0.0, 1.0, 2.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_square_mesh(0.0, 1.0, 0.0, 1.0, 0.0), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_square_mesh(0.0, 1.0, 0.0, 1.0, -0.1), Err(Error::InvalidArgument(_))));
        assert!(generate_square_mesh(1.0, 0.0, 0.0, 1.0, 0.1).is_err());
    }

    #[test]
    fn square_area_and_hmax() {
        let m = generate_square_mesh(-1.0, 1.0, -1.0, 1.0, 0.5).unwrap();
        assert!((m.total_area() - 4.0).abs() < 4e-12);
        assert!((m.h_max() - 0.5 * 2f64.sqrt()).abs() < 1e-14);
        let m = generate_square_mesh(0.0, 3.0, 0.0, 1.0, 0.3).unwrap();
        assert!((m.total_area() - 3.0).abs() < 3e-12);
        assert!(m.h_max() <= 2f64.sqrt() * 0.3 + 1e-14);
    }

    #[test]
    fn disk_boundary_on_circle() {
        for h in [0.5, 0.2, 0.07] {
            let m = generate_disk_mesh(1.0, h).unwrap();
            for (v, p) in m.vertices().iter().enumerate() {
                if m.is_boundary_vertex(v) {
                    assert!((p[0].hypot(p[1]) - 1.0).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn disk_area_bound() {
        let h = 0.04;
        let m = generate_disk_mesh(1.0, h).unwrap();
        let a = m.total_area();
        assert!(a <= PI && a >= PI - PI * h * h / 2.0, "area {a}");
    }

    #[test]
    fn disk_quality_and_topology() {
        for h in [0.5, 0.1, 0.04] {
            let m = generate_disk_mesh(1.0, h).unwrap();
            assert!(m.h_max() <= 2.0 * h, "h_max {} for h {h}", m.h_max());
            let topo = build_edge_topology(&m).unwrap();
            assert_eq!(m.num_vertices() as i64 - topo.num_edges() as i64 + m.num_triangles() as i64, 1);
        }
        let m = generate_disk_mesh(2.5, 0.3).unwrap();
        for (v, p) in m.vertices().iter().enumerate() {
            if m.is_boundary_vertex(v) {
                assert!((p[0].hypot(p[1]) - 2.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn disk_rejects_bad_input() {
        assert!(matches!(generate_disk_mesh(1.0, 1.5), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_disk_mesh(0.0, 0.1), Err(Error::InvalidArgument(_))));
        assert!(matches!(generate_disk_mesh(1.0, -0.1), Err(Error::InvalidArgument(_))));
    }
}
