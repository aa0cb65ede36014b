//! Finite element spaces on a [`TriMesh`]: continuous P1 (nodal), piecewise
//! constants (cellwise scalars and vectors) and lowest-order Raviart–Thomas
//! fluxes (one normal-flux dof per edge).

mod assembly;
mod rt0;

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::mesh::{Point, TriMesh};

pub use assembly::{assemble_qa_matrix, assemble_qb_matrix, InteriorDofs, QaOperator, Rt0Assembler};
pub use rt0::{
    rt0_basis, rt0_cell_vectors, rt0_divergence, rt0_evaluate, rt0_interpolate, rt0_lumped_form, rt0_vertex_values,
    VertexWeights,
};

macro_rules! field {
    ($(#[$doc:meta])* $name:ident, $elem:ty) => {
        $(#[$doc])*
        #[derive(Debug, Clone, PartialEq, Default)]
        pub struct $name(pub Vec<$elem>);

        impl $name {
            pub fn zeros(n: usize) -> Self {
                $name(vec![<$elem>::default(); n])
            }

            pub fn values(&self) -> &[$elem] {
                &self.0
            }

            pub fn into_inner(self) -> Vec<$elem> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [$elem];
            fn deref(&self) -> &[$elem] {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut [$elem] {
                &mut self.0
            }
        }

        impl From<Vec<$elem>> for $name {
            fn from(v: Vec<$elem>) -> Self {
                $name(v)
            }
        }
    };
}

field!(
    /// Continuous piecewise linear field, one value per vertex.
    NodalField,
    f64
);
field!(
    /// Piecewise constant scalar field, one value per triangle.
    CellField,
    f64
);
field!(
    /// Piecewise constant vector field, one 2-vector per triangle.
    CellVectorField,
    [f64; 2]
);
field!(
    /// Raviart–Thomas field: normal flux density across each edge, measured
    /// along the edge's global normal.
    EdgeFluxField,
    f64
);

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::SizeMismatch { expected, got })
    }
}

pub(crate) fn norm(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Nodal interpolant: value at each vertex.
pub fn p1_interpolate(f: impl Fn(Point) -> f64, mesh: &TriMesh) -> Result<NodalField> {
    mesh.vertices()
        .iter()
        .enumerate()
        .map(|(vertex, &p)| {
            let v = f(p);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Evaluation { vertex, x: p[0], y: p[1] })
            }
        })
        .collect::<Result<Vec<_>>>()
        .map(NodalField)
}

/// Cell means of a P1 field (exact: the mean of the three vertex values).
pub fn p0_project_nodal(w: &NodalField, mesh: &TriMesh) -> Result<CellField> {
    check_len(mesh.num_vertices(), w.len())?;
    Ok(CellField(mesh.triangles().iter().map(|t| (w[t[0]] + w[t[1]] + w[t[2]]) / 3.0).collect()))
}

/// Cell means of a function by the edge-midpoint rule (exact for quadratics).
pub fn p0_project_fn(f: impl Fn(Point) -> f64, mesh: &TriMesh) -> CellField {
    CellField(
        (0..mesh.num_triangles())
            .map(|t| {
                let p = mesh.corners(t);
                (0..3)
                    .map(|i| {
                        let (a, b) = (p[(i + 1) % 3], p[(i + 2) % 3]);
                        f([(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0])
                    })
                    .sum::<f64>()
                    / 3.0
            })
            .collect(),
    )
}

/// Elementwise constant gradient of a P1 field.
pub fn p1_gradient(w: &NodalField, mesh: &TriMesh) -> Result<CellVectorField> {
    check_len(mesh.num_vertices(), w.len())?;
    Ok(CellVectorField(
        (0..mesh.num_triangles())
            .map(|t| {
                let tri = mesh.triangles()[t];
                let g = mesh.barycentric_gradients(t);
                let mut out = [0.0; 2];
                for i in 0..3 {
                    out[0] += w[tri[i]] * g[i][0];
                    out[1] += w[tri[i]] * g[i][1];
                }
                out
            })
            .collect(),
    ))
}

/// Evaluate a P1 field at a point of triangle `t`.
pub fn p1_evaluate(w: &NodalField, mesh: &TriMesh, t: usize, x: Point) -> f64 {
    let tri = mesh.triangles()[t];
    let p = mesh.corners(t);
    let g = mesh.barycentric_gradients(t);
    (0..3)
        .map(|i| {
            let q = p[(i + 1) % 3];
            // λ_i vanishes on the opposite edge, which contains q.
            let lambda = g[i][0] * (x[0] - q[0]) + g[i][1] * (x[1] - q[1]);
            lambda * w[tri[i]]
        })
        .sum()
}

/// Vertex-quadrature inner product `(a, b)^h`.
pub fn lumped_inner(a: &NodalField, b: &NodalField, mesh: &TriMesh) -> Result<f64> {
    check_len(mesh.num_vertices(), a.len())?;
    check_len(mesh.num_vertices(), b.len())?;
    Ok(mesh
        .triangles()
        .iter()
        .zip(mesh.areas())
        .map(|(t, area)| area / 3.0 * t.iter().map(|&v| a[v] * b[v]).sum::<f64>())
        .sum())
}

/// Exact `∫ w²` of a P1 field.
pub fn p1_l2_norm_sq(w: &NodalField, mesh: &TriMesh) -> f64 {
    mesh.triangles()
        .iter()
        .zip(mesh.areas())
        .map(|(t, area)| {
            let v = [w[t[0]], w[t[1]], w[t[2]]];
            let sum: f64 = v.iter().sum();
            let sq: f64 = v.iter().map(|x| x * x).sum();
            area / 12.0 * (sq + sum * sum)
        })
        .sum()
}

/// Exact `∫ w` of a P1 field.
pub fn p1_integral(w: &NodalField, mesh: &TriMesh) -> f64 {
    mesh.lumped_mass().iter().zip(w.iter()).map(|(m, v)| m * v).sum()
}

/// `Σ |σ| c_σ`.
pub fn cell_integral(c: &CellField, mesh: &TriMesh) -> f64 {
    c.iter().zip(mesh.areas()).map(|(v, a)| v * a).sum()
}

/// `Σ |σ| |v_σ|`.
pub fn cell_vector_l1(v: &CellVectorField, mesh: &TriMesh) -> f64 {
    v.iter().zip(mesh.areas()).map(|(x, a)| a * norm(*x)).sum()
}

/// `(u, v)` for piecewise constant vector fields.
pub fn cell_vector_inner(u: &CellVectorField, v: &CellVectorField, mesh: &TriMesh) -> f64 {
    u.iter().zip(v.iter()).zip(mesh.areas()).map(|((a, b), area)| area * (a[0] * b[0] + a[1] * b[1])).sum()
}
