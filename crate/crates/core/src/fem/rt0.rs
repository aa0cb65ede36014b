//! Lowest-order Raviart–Thomas element.
//!
//! On triangle σ with corners P_0, P_1, P_2 the local basis function of edge
//! `i` (opposite P_i) is `ψ_i(x) = |e_i| / (2|σ|) · (x − P_i)`. Its normal
//! component is 1 on `e_i` (outward) and 0 on the other edges, so a global
//! coefficient is the normal flux density across the edge, and the field on σ
//! is `Σ_i sign_i · q[e_i] · ψ_i`.

use super::{check_len, CellField, CellVectorField, EdgeFluxField};
use crate::error::{Error, Result};
use crate::mesh::{EdgeTopology, Point, TriMesh};

/// Positive weights at the three corners of every triangle.
pub type VertexWeights = Vec<[f64; 3]>;

/// Local basis function of edge `i` of triangle `t`, outward-normalized.
pub fn rt0_basis(mesh: &TriMesh, t: usize, i: usize, x: Point) -> [f64; 2] {
    let p = mesh.corners(t);
    let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
    let len = (b[0] - a[0]).hypot(b[1] - a[1]);
    let s = len / (2.0 * mesh.area(t));
    [s * (x[0] - p[i][0]), s * (x[1] - p[i][1])]
}

/// Signed local coefficients `sign_i · q[e_i]` and basis scales `|e_i| / (2|σ|)`.
#[inline]
fn local_coefficients(q: &[f64], mesh: &TriMesh, topo: &EdgeTopology, t: usize) -> ([f64; 3], [f64; 3]) {
    let le = topo.triangle_edges(t);
    let two_area = 2.0 * mesh.area(t);
    let mut c = [0.0; 3];
    let mut s = [0.0; 3];
    for i in 0..3 {
        c[i] = le[i].sign * q[le[i].edge];
        s[i] = topo.length(le[i].edge) / two_area;
    }
    (c, s)
}

pub fn rt0_evaluate(q: &EdgeFluxField, mesh: &TriMesh, topo: &EdgeTopology, t: usize, x: Point) -> Result<[f64; 2]> {
    if t >= mesh.num_triangles() {
        return Err(Error::InvalidArgument(format!("triangle {t} out of range ({} triangles)", mesh.num_triangles())));
    }
    check_len(topo.num_edges(), q.len())?;
    let (c, s) = local_coefficients(q, mesh, topo, t);
    let p = mesh.corners(t);
    let mut v = [0.0; 2];
    for i in 0..3 {
        v[0] += c[i] * s[i] * (x[0] - p[i][0]);
        v[1] += c[i] * s[i] * (x[1] - p[i][1]);
    }
    Ok(v)
}

/// Values of the field at the corners of triangle `t`, using that triangle's
/// local representation.
pub fn rt0_vertex_values(q: &[f64], mesh: &TriMesh, topo: &EdgeTopology, t: usize) -> [[f64; 2]; 3] {
    let (c, s) = local_coefficients(q, mesh, topo, t);
    let p = mesh.corners(t);
    let mut out = [[0.0; 2]; 3];
    for (j, pj) in p.iter().enumerate() {
        for i in 0..3 {
            if i != j {
                out[j][0] += c[i] * s[i] * (pj[0] - p[i][0]);
                out[j][1] += c[i] * s[i] * (pj[1] - p[i][1]);
            }
        }
    }
    out
}

/// Field values at triangle centroids.
pub fn rt0_cell_vectors(q: &EdgeFluxField, mesh: &TriMesh, topo: &EdgeTopology) -> CellVectorField {
    CellVectorField(
        (0..mesh.num_triangles())
            .map(|t| {
                let v = rt0_vertex_values(q, mesh, topo, t);
                [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
            })
            .collect(),
    )
}

/// Edge-averaged normal component, by two-point Gauss quadrature on each edge.
pub fn rt0_interpolate(v: impl Fn(Point) -> [f64; 2], mesh: &TriMesh, topo: &EdgeTopology) -> EdgeFluxField {
    let g = 0.5 / 3f64.sqrt();
    let verts = mesh.vertices();
    EdgeFluxField(
        topo.edges()
            .iter()
            .enumerate()
            .map(|(e, &[a, b])| {
                let (pa, pb) = (verts[a], verts[b]);
                let n = topo.normal(e);
                [0.5 - g, 0.5 + g]
                    .iter()
                    .map(|&s| {
                        let val = v([pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])]);
                        val[0] * n[0] + val[1] * n[1]
                    })
                    .sum::<f64>()
                    / 2.0
            })
            .collect(),
    )
}

/// Cellwise divergence, by the divergence theorem (exact).
pub fn rt0_divergence(q: &EdgeFluxField, mesh: &TriMesh, topo: &EdgeTopology) -> Result<CellField> {
    check_len(topo.num_edges(), q.len())?;
    Ok(CellField(
        (0..mesh.num_triangles())
            .map(|t| {
                topo.triangle_edges(t).iter().map(|l| l.sign * q[l.edge] * topo.length(l.edge)).sum::<f64>()
                    / mesh.area(t)
            })
            .collect(),
    ))
}

/// Weighted vertex-quadrature pairing `Σ_σ |σ|/3 Σ_j w(σ,j) q1(P_j)·q2(P_j)`.
pub fn rt0_lumped_form(
    weights: &[[f64; 3]],
    q1: &EdgeFluxField,
    q2: &EdgeFluxField,
    mesh: &TriMesh,
    topo: &EdgeTopology,
) -> Result<f64> {
    check_len(mesh.num_triangles(), weights.len())?;
    check_len(topo.num_edges(), q1.len())?;
    check_len(topo.num_edges(), q2.len())?;
    check_weights(weights)?;
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let a = rt0_vertex_values(q1, mesh, topo, t);
            let b = rt0_vertex_values(q2, mesh, topo, t);
            mesh.area(t) / 3.0 * (0..3).map(|j| weights[t][j] * (a[j][0] * b[j][0] + a[j][1] * b[j][1])).sum::<f64>()
        })
        .sum())
}

pub(crate) fn check_weights(weights: &[[f64; 3]]) -> Result<()> {
    for (t, w) in weights.iter().enumerate() {
        if let Some(bad) = w.iter().find(|x| !(**x > 0.0) || !x.is_finite()) {
            return Err(Error::InvalidArgument(format!("non-positive weight {bad:e} on triangle {t}")));
        }
    }
    Ok(())
}
