//! Conforming triangulations of polygonal domains.
//!
//! A [`TriMesh`] is immutable once built. Construction validates orientation,
//! conformity and degeneracy, so every downstream finite element routine can
//! assume a well-formed mesh.

mod generate;
mod io;
mod topology;

use std::collections::HashMap;

use crate::error::{Error, Result};

pub use generate::{generate_disk_mesh, generate_square_mesh};
pub use io::{load_mesh, read_mesh, write_mesh};
pub use topology::{build_edge_topology, EdgeTopology, LocalEdge};

pub type Point = [f64; 2];

/// Conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    areas: Vec<f64>,
    h_max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshQuality {
    pub h_max: f64,
    pub h_min: f64,
    /// Largest ratio of element diameter to inradius.
    pub regularity: f64,
}

impl TriMesh {
    /// Validate and build a mesh. Clockwise triangles are flipped.
    pub fn new(vertices: Vec<Point>, mut triangles: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        if triangles.is_empty() {
            return Err(Error::Validation("mesh has no triangles".into()));
        }
        if let Some((k, _)) = vertices.iter().enumerate().find(|(_, p)| !p[0].is_finite() || !p[1].is_finite()) {
            return Err(Error::Validation(format!("vertex {k} has non-finite coordinates")));
        }
        let mut used = vec![false; nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                if v >= nv {
                    return Err(Error::Validation(format!(
                        "triangle {t} references vertex {v}, but the mesh has {nv} vertices"
                    )));
                }
                used[v] = true;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                return Err(Error::Validation(format!("triangle {t} repeats a vertex")));
            }
        }
        if let Some(v) = used.iter().position(|u| !u) {
            return Err(Error::Validation(format!("vertex {v} belongs to no triangle")));
        }

        let h_max = triangles.iter().map(|t| diameter(&vertices, t)).fold(0.0, f64::max);
        let mut areas = Vec::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            let mut area = signed_area(&vertices, tri);
            if area < 0.0 {
                tri.swap(1, 2);
                area = -area;
            }
            if area < 1e-14 * h_max * h_max {
                return Err(Error::Geometry { triangle: t, area });
            }
            areas.push(area);
        }

        // Every directed edge may occur at most once; an undirected edge at most twice.
        let mut directed: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * triangles.len());
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
                if let Some(other) = directed.insert((a, b), t) {
                    return Err(Error::Validation(format!(
                        "edge ({a}, {b}) is shared by triangles {other} and {t} with the same orientation"
                    )));
                }
            }
        }
        let mut boundary_vertex = vec![false; nv];
        let mut boundary_edges = Vec::new();
        for &(a, b) in directed.keys() {
            if !directed.contains_key(&(b, a)) {
                boundary_vertex[a] = true;
                boundary_vertex[b] = true;
                boundary_edges.push((a.min(b), a.max(b)));
            }
        }
        boundary_edges.sort_unstable();
        check_hanging_nodes(&vertices, &boundary_edges, &boundary_vertex)?;

        Ok(TriMesh { vertices, triangles, boundary_vertex, areas, h_max })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.boundary_vertex[v]
    }

    pub fn areas(&self) -> &[f64] {
        &self.areas
    }

    pub fn area(&self, t: usize) -> f64 {
        self.areas[t]
    }

    pub fn h_max(&self) -> f64 {
        self.h_max
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn num_interior_vertices(&self) -> usize {
        self.boundary_vertex.iter().filter(|b| !**b).count()
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }

    /// Corner coordinates of triangle `t`, counterclockwise.
    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Vertex-patch areas divided by three: the lumped (vertex quadrature) mass.
    pub fn lumped_mass(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.num_vertices()];
        for (tri, area) in self.triangles.iter().zip(&self.areas) {
            for &v in tri {
                m[v] += area / 3.0;
            }
        }
        m
    }

    /// Gradients of the three barycentric coordinates on triangle `t`.
    pub fn barycentric_gradients(&self, t: usize) -> [Point; 3] {
        let p = self.corners(t);
        let two_area = 2.0 * self.areas[t];
        let mut g = [[0.0; 2]; 3];
        for i in 0..3 {
            let q1 = p[(i + 1) % 3];
            let q2 = p[(i + 2) % 3];
            g[i] = [(q1[1] - q2[1]) / two_area, (q2[0] - q1[0]) / two_area];
        }
        g
    }

    pub fn quality(&self) -> MeshQuality {
        mesh_quality(self)
    }
}

pub fn mesh_quality(mesh: &TriMesh) -> MeshQuality {
    let mut h_min = f64::INFINITY;
    let mut regularity: f64 = 0.0;
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let d = diameter(&mesh.vertices, tri);
        let perimeter: f64 = (0..3).map(|i| dist(mesh.vertices[tri[i]], mesh.vertices[tri[(i + 1) % 3]])).sum();
        let inradius = 2.0 * mesh.areas[t] / perimeter;
        h_min = h_min.min(d);
        regularity = regularity.max(d / inradius);
    }
    MeshQuality { h_max: mesh.h_max, h_min, regularity }
}

pub(crate) fn dist(a: Point, b: Point) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn diameter(vertices: &[Point], tri: &[usize; 3]) -> f64 {
    (0..3).map(|i| dist(vertices[tri[i]], vertices[tri[(i + 1) % 3]])).fold(0.0, f64::max)
}

fn signed_area(vertices: &[Point], tri: &[usize; 3]) -> f64 {
    let [a, b, c] = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

/// A vertex lying strictly inside a boundary edge means a T-junction.
fn check_hanging_nodes(vertices: &[Point], boundary_edges: &[(usize, usize)], boundary_vertex: &[bool]) -> Result<()> {
    let candidates: Vec<usize> = (0..vertices.len()).filter(|&v| boundary_vertex[v]).collect();
    for &(a, b) in boundary_edges {
        let (pa, pb) = (vertices[a], vertices[b]);
        let len = dist(pa, pb);
        let (lo_x, hi_x) = (pa[0].min(pb[0]), pa[0].max(pb[0]));
        let (lo_y, hi_y) = (pa[1].min(pb[1]), pa[1].max(pb[1]));
        let slack = 1e-10 * len;
        for &v in &candidates {
            if v == a || v == b {
                continue;
            }
            let p = vertices[v];
            if p[0] < lo_x - slack || p[0] > hi_x + slack || p[1] < lo_y - slack || p[1] > hi_y + slack {
                continue;
            }
            let cross = (pb[0] - pa[0]) * (p[1] - pa[1]) - (pb[1] - pa[1]) * (p[0] - pa[0]);
            if cross.abs() <= 1e-10 * len * len {
                let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / (len * len);
                if s > 1e-10 && s < 1.0 - 1e-10 {
                    return Err(Error::Validation(format!(
                        "non-conforming edge ({a}, {b}): vertex {v} lies inside it"
                    )));
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_triangle() -> TriMesh {
        TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap()
    }

    #[test]
    fn clockwise_triangles_are_flipped() {
        let m = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 2, 1]]).unwrap();
        assert_eq!(m.triangles()[0], [0, 1, 2]);
        assert!((m.area(0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn out_of_range_index_is_rejected() {
        let err = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 3]]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)), "{err}");
    }

    #[test]
    fn unused_vertex_is_rejected() {
        let err = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::Validation(_)));
    }

    #[test]
    fn degenerate_triangle_is_rejected() {
        let err = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]], vec![[0, 1, 2]]).unwrap_err();
        assert!(matches!(err, Error::Geometry { triangle: 0, .. }));
    }

    #[test]
    fn hanging_node_is_rejected() {
        // Two small triangles on the left meet one big triangle on the right at x = 1.
        let v = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 0.5], [1.0, 1.0], [0.0, 1.0], [2.0, 0.5]];
        let t = vec![[0, 1, 2], [0, 2, 4], [2, 3, 4], [1, 5, 3]];
        let err = TriMesh::new(v, t).unwrap_err();
        assert!(err.to_string().contains("non-conforming edge"), "{err}");
    }

    #[test]
    fn edge_shared_by_three_triangles_is_rejected() {
        let v = vec![[0.0, 0.0], [1.0, 0.0], [0.5, 1.0], [0.5, -1.0], [0.5, 2.0]];
        let t = vec![[0, 1, 2], [1, 0, 3], [0, 1, 4]];
        assert!(TriMesh::new(v, t).is_err());
    }

    #[test]
    fn quality_of_reference_triangles() {
        let q = unit_triangle().quality();
        assert!((q.h_max - 2f64.sqrt()).abs() < 1e-15);

        let s3 = 3f64.sqrt();
        let eq = TriMesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.5, s3 / 2.0]], vec![[0, 1, 2]]).unwrap();
        let q = eq.quality();
        assert!((q.regularity - 2.0 * s3).abs() < 1e-12);
        assert!((q.h_min - 1.0).abs() < 1e-15);
    }

    #[test]
    fn barycentric_gradients_of_unit_triangle() {
        let g = unit_triangle().barycentric_gradients(0);
        assert_eq!(g, [[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]);
    }

    #[test]
    fn boundary_flags_of_single_triangle() {
        assert_eq!(unit_triangle().boundary_vertex_flags(), &[true, true, true]);
    }
}
