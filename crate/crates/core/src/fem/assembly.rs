use super::check_len;
use super::rt0::check_weights;
use crate::error::{Error, Result};
use crate::linalg::SparseSpd;
use crate::mesh::{EdgeTopology, TriMesh};

/// Numbering of the interior vertices, which carry the dofs of U^h_0.
#[derive(Debug, Clone, PartialEq)]
pub struct InteriorDofs {
    pub vertex_of_dof: Vec<usize>,
    pub dof_of_vertex: Vec<Option<usize>>,
}

impl InteriorDofs {
    pub fn new(mesh: &TriMesh) -> Self {
        let mut vertex_of_dof = Vec::new();
        let dof_of_vertex = mesh
            .boundary_vertex_flags()
            .iter()
            .enumerate()
            .map(|(v, &b)| {
                (!b).then(|| {
                    vertex_of_dof.push(v);
                    vertex_of_dof.len() - 1
                })
            })
            .collect();
        InteriorDofs { vertex_of_dof, dof_of_vertex }
    }

    pub fn len(&self) -> usize {
        self.vertex_of_dof.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertex_of_dof.is_empty()
    }
}

/// Matrix of `(1/τ)(·,·)^h + ρ(∇·,∇·)` on U^h_0.
#[derive(Debug, Clone)]
pub struct QaOperator {
    pub matrix: SparseSpd,
    pub dofs: InteriorDofs,
    pub tau: f64,
    pub rho: f64,
}

pub fn assemble_qa_matrix(mesh: &TriMesh, tau: f64, rho: f64) -> Result<QaOperator> {
    if !(tau > 0.0) {
        return Err(Error::InvalidArgument(format!("time step {tau} must be positive")));
    }
    if !(rho > 0.0) {
        return Err(Error::InvalidArgument(format!("augmentation parameter {rho} must be positive")));
    }
    let dofs = InteriorDofs::new(mesh);
    if dofs.is_empty() {
        return Err(Error::Validation("mesh has no interior vertices".into()));
    }
    let mut triplets = Vec::with_capacity(9 * mesh.num_triangles());
    let mass = mesh.lumped_mass();
    for (dof, &v) in dofs.vertex_of_dof.iter().enumerate() {
        triplets.push((dof, dof, mass[v] / tau));
    }
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.barycentric_gradients(t);
        let area = mesh.area(t);
        for i in 0..3 {
            let Some(di) = dofs.dof_of_vertex[tri[i]] else { continue };
            for j in 0..3 {
                let Some(dj) = dofs.dof_of_vertex[tri[j]] else { continue };
                triplets.push((di, dj, rho * area * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
            }
        }
    }
    Ok(QaOperator { matrix: SparseSpd::from_triplets(dofs.len(), triplets), dofs, tau, rho })
}

/// Edge-indexed assembly of `(w ψ, ψ)^h + τ(∇·ψ, ∇·ψ)` with a fixed pattern,
/// so a matrix can be refilled without re-deriving its structure.
#[derive(Debug, Clone)]
pub struct Rt0Assembler {
    pattern: SparseSpd,
    slots: Vec<[usize; 9]>,
}

impl Rt0Assembler {
    pub fn new(mesh: &TriMesh, topo: &EdgeTopology) -> Self {
        let triplets = (0..mesh.num_triangles()).flat_map(|t| {
            let le = *topo.triangle_edges(t);
            (0..9).map(move |k| (le[k / 3].edge, le[k % 3].edge, 0.0))
        });
        let pattern = SparseSpd::from_triplets(topo.num_edges(), triplets);
        let slots = (0..mesh.num_triangles())
            .map(|t| {
                let le = topo.triangle_edges(t);
                let mut s = [0usize; 9];
                for (k, slot) in s.iter_mut().enumerate() {
                    *slot = pattern.position(le[k / 3].edge, le[k % 3].edge).expect("entry in pattern");
                }
                s
            })
            .collect();
        Rt0Assembler { pattern, slots }
    }

    pub fn assemble(&self, mesh: &TriMesh, topo: &EdgeTopology, weights: &[[f64; 3]], tau: f64) -> Result<SparseSpd> {
        let mut out = self.pattern.clone();
        self.assemble_into(mesh, topo, weights, tau, &mut out)?;
        Ok(out)
    }

    /// Overwrite the values of `out`, which must come from [`Rt0Assembler::assemble`].
    pub fn assemble_into(
        &self,
        mesh: &TriMesh,
        topo: &EdgeTopology,
        weights: &[[f64; 3]],
        tau: f64,
        out: &mut SparseSpd,
    ) -> Result<()> {
        check_len(mesh.num_triangles(), weights.len())?;
        check_weights(weights)?;
        if !(tau >= 0.0) {
            return Err(Error::InvalidArgument(format!("time step {tau} must be non-negative")));
        }
        check_len(self.pattern.nnz(), out.nnz())?;
        let values = out.values_mut();
        values.iter_mut().for_each(|v| *v = 0.0);
        for (t, w) in weights.iter().enumerate() {
            let local = local_qb_matrix(mesh, topo, t, w, tau);
            for (k, &slot) in self.slots[t].iter().enumerate() {
                values[slot] += local[k / 3][k % 3];
            }
        }
        Ok(())
    }
}

/// Local 3×3 block on triangle `t`, already multiplied by the edge signs.
pub(crate) fn local_qb_matrix(mesh: &TriMesh, topo: &EdgeTopology, t: usize, w: &[f64; 3], tau: f64) -> [[f64; 3]; 3] {
    let p = mesh.corners(t);
    let le = topo.triangle_edges(t);
    let area = mesh.area(t);
    let len: [f64; 3] = std::array::from_fn(|i| topo.length(le[i].edge));
    let scale: [f64; 3] = std::array::from_fn(|i| len[i] / (2.0 * area));
    // psi[i][k]: basis i at corner k
    let psi: [[[f64; 2]; 3]; 3] = std::array::from_fn(|i| {
        std::array::from_fn(|k| [scale[i] * (p[k][0] - p[i][0]), scale[i] * (p[k][1] - p[i][1])])
    });
    let mut a = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let mass: f64 =
                (0..3).map(|k| w[k] * (psi[i][k][0] * psi[j][k][0] + psi[i][k][1] * psi[j][k][1])).sum::<f64>() * area
                    / 3.0;
            let divdiv = tau * len[i] * len[j] / area;
            a[i][j] = le[i].sign * le[j].sign * (mass + divdiv);
        }
    }
    a
}

pub fn assemble_qb_matrix(mesh: &TriMesh, topo: &EdgeTopology, weights: &[[f64; 3]], tau: f64) -> Result<SparseSpd> {
    Rt0Assembler::new(mesh, topo).assemble(mesh, topo, weights, tau)
}
