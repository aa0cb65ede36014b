use std::collections::BTreeMap;

use super::{dist, Point, TriMesh};
use crate::error::{Error, Result};

/// Reference from a triangle to one of its edges.
///
/// `sign` is `+1.0` when the edge's global normal is the triangle's outward
/// normal and `-1.0` otherwise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalEdge {
    pub edge: usize,
    pub sign: f64,
}

/// Edges of a [`TriMesh`] with a global orientation.
///
/// Edge `e = (a, b)` always has `a < b`; its global unit normal is the tangent
/// `x_b - x_a` rotated clockwise. Local edge `i` of a triangle is the edge
/// opposite local vertex `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeTopology {
    edges: Vec<[usize; 2]>,
    triangle_edges: Vec<[LocalEdge; 3]>,
    edge_triangles: Vec<Vec<usize>>,
    boundary: Vec<bool>,
    lengths: Vec<f64>,
    normals: Vec<Point>,
}

pub fn build_edge_topology(mesh: &TriMesh) -> Result<EdgeTopology> {
    let mut owners: BTreeMap<(usize, usize), Vec<(usize, usize)>> = BTreeMap::new();
    for (t, tri) in mesh.triangles().iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (tri[(i + 1) % 3], tri[(i + 2) % 3]);
            owners.entry((a.min(b), a.max(b))).or_default().push((t, i));
        }
    }

    let ne = owners.len();
    let mut edges = Vec::with_capacity(ne);
    let mut edge_triangles = Vec::with_capacity(ne);
    let mut boundary = Vec::with_capacity(ne);
    let mut lengths = Vec::with_capacity(ne);
    let mut normals = Vec::with_capacity(ne);
    let placeholder = LocalEdge { edge: usize::MAX, sign: 0.0 };
    let mut triangle_edges = vec![[placeholder; 3]; mesh.num_triangles()];
    let verts = mesh.vertices();

    for (e, (&(a, b), users)) in owners.iter().enumerate() {
        if users.len() > 2 {
            return Err(Error::Validation(format!(
                "non-conforming edge ({a}, {b}) is shared by {} triangles",
                users.len()
            )));
        }
        let (pa, pb) = (verts[a], verts[b]);
        let len = dist(pa, pb);
        let normal = [(pb[1] - pa[1]) / len, -(pb[0] - pa[0]) / len];
        for &(t, i) in users {
            let opposite = verts[mesh.triangles()[t][i]];
            let outward = normal[0] * (pa[0] - opposite[0]) + normal[1] * (pa[1] - opposite[1]);
            triangle_edges[t][i] = LocalEdge { edge: e, sign: if outward > 0.0 { 1.0 } else { -1.0 } };
        }
        if let [(t0, i0), (t1, i1)] = users[..] {
            if triangle_edges[t0][i0].sign == triangle_edges[t1][i1].sign {
                return Err(Error::Validation(format!(
                    "non-conforming edge ({a}, {b}): triangles {t0} and {t1} lie on the same side"
                )));
            }
        }
        edges.push([a, b]);
        edge_triangles.push(users.iter().map(|&(t, _)| t).collect());
        boundary.push(users.len() == 1);
        lengths.push(len);
        normals.push(normal);
    }

    Ok(EdgeTopology { edges, triangle_edges, edge_triangles, boundary, lengths, normals })
}

impl EdgeTopology {
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> &[LocalEdge; 3] {
        &self.triangle_edges[t]
    }

    pub fn num_triangles(&self) -> usize {
        self.triangle_edges.len()
    }

    /// Triangles adjacent to edge `e` (one for boundary edges, two otherwise).
    pub fn edge_triangles(&self, e: usize) -> &[usize] {
        &self.edge_triangles[e]
    }

    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.boundary[e]
    }

    pub fn boundary_edge_flags(&self) -> &[bool] {
        &self.boundary
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths
    }

    pub fn length(&self, e: usize) -> f64 {
        self.lengths[e]
    }

    pub fn normal(&self, e: usize) -> Point {
        self.normals[e]
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.boundary.iter().filter(|b| **b).count()
    }
}
