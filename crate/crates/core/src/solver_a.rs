//! Continuous-surface scheme: P1 surface, P0 flux, solved by an augmented
//! Lagrangian splitting (ALG2) in which the gradient bound is refreshed after
//! every splitting iteration.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_qa_matrix, check_len, norm, p0_project_nodal, p1_gradient, CellField, CellVectorField, NodalField,
    QaOperator,
};
use crate::linalg::Cholesky;
use crate::material::{m_eps_h, ModelParams, SupportData};
use crate::mesh::TriMesh;

/// Stopping rule of the splitting iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingParamsA {
    /// Bound on the relative L1 change of `W` between iterations.
    pub tol_w: f64,
    /// Bound on the relative L1 change of `φ` between iterations.
    pub tol_phi: f64,
    /// Optional extra clause: `max_σ (|∇W| − M)₊` must also be below this.
    pub tol_gradient: Option<f64>,
    pub max_iters: usize,
}

impl Default for StoppingParamsA {
    fn default() -> Self {
        StoppingParamsA { tol_w: 1e-6, tol_phi: 5e-4, tol_gradient: None, max_iters: 5000 }
    }
}

impl StoppingParamsA {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol_w > 0.0 && self.tol_phi > 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(format!("stopping parameters must be positive: {self:?}")));
        }
        if let Some(g) = self.tol_gradient {
            if !(g > 0.0) {
                return Err(Error::InvalidArgument(format!("gradient tolerance {g} must be positive")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverStateA {
    pub w: NodalField,
    pub phi: CellVectorField,
    pub q: CellVectorField,
    pub w_prev_time: NodalField,
    pub rho: f64,
    pub iter_count: usize,
}

/// Diagnostics of one converged time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStatsA {
    pub iterations: usize,
    pub rel_change_w: f64,
    pub rel_change_phi: f64,
    /// `max_σ (|∇W| − M_σ)₊`.
    pub gradient_excess: f64,
    /// `|(M, |Q|) + (∇W, Q)| / (M, |Q|)`, zero when `Q` vanishes.
    pub complementarity: f64,
}

/// `φ̂ = ∇W − Q/ρ` projected onto the ball of radius `M`, cell by cell.
pub fn qa_projection_substep(
    grad_w: &CellVectorField,
    q_prev: &CellVectorField,
    mh: &CellField,
    rho: f64,
) -> Result<CellVectorField> {
    check_len(grad_w.len(), q_prev.len())?;
    check_len(grad_w.len(), mh.len())?;
    Ok(CellVectorField(
        grad_w
            .iter()
            .zip(q_prev.iter())
            .zip(mh.iter())
            .map(|((g, q), &m)| {
                let hat = [(rho * g[0] - q[0]) / rho, (rho * g[1] - q[1]) / rho];
                let len = norm(hat);
                if len <= m {
                    hat
                } else {
                    [hat[0] / len * m, hat[1] / len * m]
                }
            })
            .collect(),
    ))
}

/// `Q − ρ(∇W − φ)` cellwise.
pub fn qa_multiplier_update(
    q_prev: &CellVectorField,
    grad_w: &CellVectorField,
    phi: &CellVectorField,
    rho: f64,
) -> Result<CellVectorField> {
    check_len(q_prev.len(), grad_w.len())?;
    check_len(q_prev.len(), phi.len())?;
    Ok(CellVectorField(
        q_prev
            .iter()
            .zip(grad_w.iter())
            .zip(phi.iter())
            .map(|((q, g), p)| [q[0] - rho * (g[0] - p[0]), q[1] - rho * (g[1] - p[1])])
            .collect(),
    ))
}

/// `num / den`, or 0/∞ when the denominator vanishes depending on the numerator.
fn relative(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn nodal_rel_change(prev: &NodalField, curr: &NodalField, mass: &[f64]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), m) in prev.iter().zip(curr.iter()).zip(mass) {
        num += m * (b - a).abs();
        den += m * b.abs();
    }
    relative(num, den)
}

fn cell_rel_change(prev: &CellVectorField, curr: &CellVectorField, mesh: &TriMesh) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), area) in prev.iter().zip(curr.iter()).zip(mesh.areas()) {
        num += area * norm([b[0] - a[0], b[1] - a[1]]);
        den += area * norm(*b);
    }
    relative(num, den)
}

/// Relative L1 changes of `W` (vertex quadrature) and `φ` between two iterates.
pub fn qa_relative_changes(prev: &SolverStateA, curr: &SolverStateA, mesh: &TriMesh) -> (f64, f64) {
    (nodal_rel_change(&prev.w, &curr.w, &mesh.lumped_mass()), cell_rel_change(&prev.phi, &curr.phi, mesh))
}

pub fn qa_converged(prev: &SolverStateA, curr: &SolverStateA, mesh: &TriMesh, stopping: &StoppingParamsA) -> bool {
    let (dw, dphi) = qa_relative_changes(prev, curr, mesh);
    dw < stopping.tol_w && dphi < stopping.tol_phi || dw == 0.0 && dphi == 0.0
}

/// `max_σ (|∇W| − M_σ)₊`.
pub fn gradient_excess(grad_w: &CellVectorField, mh: &CellField) -> f64 {
    grad_w.iter().zip(mh.iter()).map(|(g, m)| norm(*g) - m).fold(0.0, f64::max)
}

/// Relative residual of `(M, |Q|) + (∇W, Q) = 0`.
pub fn complementarity_residual(grad_w: &CellVectorField, q: &CellVectorField, mh: &CellField, mesh: &TriMesh) -> f64 {
    let (mut bound, mut pairing) = (0.0, 0.0);
    for t in 0..mesh.num_triangles() {
        let a = mesh.area(t);
        bound += a * mh[t] * norm(q[t]);
        pairing += a * (grad_w[t][0] * q[t][0] + grad_w[t][1] * q[t][1]);
    }
    let num = (bound + pairing).abs();
    if bound > 0.0 {
        num / bound
    } else {
        num
    }
}

/// Per-vertex load `(f, λ_v)` of a nodal source, integrated exactly.
pub fn p1_load(f: &NodalField, mesh: &TriMesh) -> Result<Vec<f64>> {
    check_len(mesh.num_vertices(), f.len())?;
    let mut load = vec![0.0; mesh.num_vertices()];
    for (tri, area) in mesh.triangles().iter().zip(mesh.areas()) {
        let sum: f64 = tri.iter().map(|&v| f[v]).sum();
        for &v in tri {
            load[v] += area / 12.0 * (f[v] + sum);
        }
    }
    Ok(load)
}

/// Time stepper for the continuous-surface scheme with a fixed `τ` and `ρ`.
pub struct QaSolver<'a> {
    mesh: &'a TriMesh,
    support: &'a SupportData,
    params: ModelParams,
    stopping: StoppingParamsA,
    op: QaOperator,
    factor: Cholesky,
    load: Vec<f64>,
    mass: Vec<f64>,
}

impl<'a> QaSolver<'a> {
    pub fn new(
        mesh: &'a TriMesh,
        support: &'a SupportData,
        source: &NodalField,
        params: ModelParams,
        rho: f64,
        stopping: StoppingParamsA,
    ) -> Result<Self> {
        params.validate()?;
        stopping.validate()?;
        check_len(mesh.num_vertices(), support.w0_nodal.len())?;
        let op = assemble_qa_matrix(mesh, params.tau, rho)?;
        let factor = Cholesky::factor(&op.matrix)?;
        Ok(QaSolver {
            mesh,
            support,
            params,
            stopping,
            load: p1_load(source, mesh)?,
            mass: mesh.lumped_mass(),
            op,
            factor,
        })
    }

    /// `W^0 = π^h w0` with `φ = Q = 0`.
    pub fn initial_state(&self) -> SolverStateA {
        let nt = self.mesh.num_triangles();
        SolverStateA {
            w: self.support.w0_nodal.clone(),
            phi: CellVectorField::zeros(nt),
            q: CellVectorField::zeros(nt),
            w_prev_time: self.support.w0_nodal.clone(),
            rho: self.op.rho,
            iter_count: 0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Solve the linear problem for `W` given `φ`, `Q` and `W_prev_time` of `state`.
    pub fn linear_substep(&self, state: &SolverStateA) -> NodalField {
        let (mesh, rho, tau) = (self.mesh, self.op.rho, self.op.tau);
        let mut rhs_full: Vec<f64> =
            (0..mesh.num_vertices()).map(|v| self.mass[v] * state.w_prev_time[v] / tau + self.load[v]).collect();
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = mesh.barycentric_gradients(t);
            let a = mesh.area(t);
            let v = [rho * state.phi[t][0] + state.q[t][0], rho * state.phi[t][1] + state.q[t][1]];
            for i in 0..3 {
                rhs_full[tri[i]] += a * (v[0] * g[i][0] + v[1] * g[i][1]);
            }
        }
        let rhs: Vec<f64> = self.op.dofs.vertex_of_dof.iter().map(|&v| rhs_full[v]).collect();
        let x = self.factor.solve(&rhs);
        let mut w = NodalField::zeros(mesh.num_vertices());
        for (dof, &v) in self.op.dofs.vertex_of_dof.iter().enumerate() {
            w[v] = x[dof];
        }
        w
    }

    /// Slope bound `M_ε^h(P^h W)`.
    pub fn slope_bound(&self, w: &NodalField) -> CellField {
        let wh = p0_project_nodal(w, self.mesh).expect("nodal field sized for mesh");
        m_eps_h(&wh, self.support, &self.params)
    }

    /// One splitting iteration: linear solve, bound update, projection, multiplier update.
    pub fn iterate(&self, state: &SolverStateA) -> SolverStateA {
        let w = self.linear_substep(state);
        let grad = p1_gradient(&w, self.mesh).expect("nodal field sized for mesh");
        let mh = self.slope_bound(&w);
        let phi = qa_projection_substep(&grad, &state.q, &mh, state.rho).expect("cell fields sized for mesh");
        let q = qa_multiplier_update(&state.q, &grad, &phi, state.rho).expect("cell fields sized for mesh");
        SolverStateA {
            w,
            phi,
            q,
            w_prev_time: state.w_prev_time.clone(),
            rho: state.rho,
            iter_count: state.iter_count + 1,
        }
    }

    /// Advance `state` by one time step, warm starting from its `φ` and `Q`.
    /// `observe` sees every iterate.
    pub fn time_step_observed(
        &self,
        state: &mut SolverStateA,
        mut observe: impl FnMut(&SolverStateA),
    ) -> Result<StepStatsA> {
        state.w_prev_time = state.w.clone();
        state.iter_count = 0;
        let mut last = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for _ in 0..self.stopping.max_iters {
            let next = self.iterate(state);
            observe(&next);
            let (dw, dphi) = qa_relative_changes(state, &next, self.mesh);
            *state = next;
            if state.w.iter().any(|v| !v.is_finite()) {
                return Err(Error::Numerical("non-finite iterate in the splitting iteration".into()));
            }
            let base = dw < self.stopping.tol_w && dphi < self.stopping.tol_phi || dw == 0.0 && dphi == 0.0;
            let grad = p1_gradient(&state.w, self.mesh)?;
            let mh = self.slope_bound(&state.w);
            let excess = gradient_excess(&grad, &mh);
            last = (dw, dphi, excess);
            let extra = self.stopping.tol_gradient.is_none_or(|tol| excess <= tol);
            if base && extra {
                return Ok(StepStatsA {
                    iterations: state.iter_count,
                    rel_change_w: dw,
                    rel_change_phi: dphi,
                    gradient_excess: excess,
                    complementarity: complementarity_residual(&grad, &state.q, &mh, self.mesh),
                });
            }
        }
        Err(Error::NonConvergence {
            step: 0,
            iterations: self.stopping.max_iters,
            detail: format!(
                "relative change of W {:.3e}, of phi {:.3e}, gradient excess {:.3e}",
                last.0, last.1, last.2
            ),
        })
    }

    pub fn time_step(&self, state: &mut SolverStateA) -> Result<StepStatsA> {
        self.time_step_observed(state, |_| {})
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::p1_integral;
    use crate::material::{build_support, SupportSpec};
    use crate::mesh::generate_square_mesh;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cv(v: Vec<[f64; 2]>) -> CellVectorField {
        CellVectorField(v)
    }

    #[test]
    fn projection_examples() {
        let g = cv(vec![[0.3, 0.4], [0.1, 0.0], [0.8, 0.0]]);
        let q = cv(vec![[0.0, 0.0]; 3]);
        let m = CellField(vec![0.4, 0.4, 0.4]);
        let p = qa_projection_substep(&g, &q, &m, 1.0).unwrap();
        assert!((p[0][0] - 0.24).abs() < 1e-15 && (p[0][1] - 0.32).abs() < 1e-15);
        assert_eq!(p[1], [0.1, 0.0]);
        assert_eq!(p[2], [0.4, 0.0]);
        // φ̂ uses -Q/ρ
        let q = cv(vec![[-0.5, 0.0]; 3]);
        let p = qa_projection_substep(&cv(vec![[0.0, 0.0]; 3]), &q, &m, 2.0).unwrap();
        assert_eq!(p[0], [0.25, 0.0]);
    }

    /// The projection is the closest point of the ball: `(φ̂ − φ)·(ψ − φ) ≤ 0` for all `|ψ| ≤ M`.
    #[test]
    fn projection_variational_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let g = cv((0..n).map(|_| [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)]).collect());
        let q = cv((0..n).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect());
        let m = CellField((0..n).map(|_| rng.random_range(0.1..1.5)).collect());
        let rho = 0.7;
        let p = qa_projection_substep(&g, &q, &m, rho).unwrap();
        for t in 0..n {
            let hat = [g[t][0] - q[t][0] / rho, g[t][1] - q[t][1] / rho];
            assert!(norm(p[t]) <= m[t] * (1.0 + 1e-15));
            for _ in 0..4 {
                let ang: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                let r = m[t] * rng.random_range(0.0f64..1.0).sqrt();
                let psi = [r * ang.cos(), r * ang.sin()];
                let vi = (hat[0] - p[t][0]) * (psi[0] - p[t][0]) + (hat[1] - p[t][1]) * (psi[1] - p[t][1]);
                assert!(vi <= 1e-12, "{vi}");
            }
        }
    }

    #[test]
    fn multiplier_examples() {
        let q = cv(vec![[0.0, 0.0]]);
        let out = qa_multiplier_update(&q, &cv(vec![[1.0, 0.0]]), &cv(vec![[0.0, 0.0]]), 1.0).unwrap();
        assert_eq!(out[0], [-1.0, 0.0]);
        let q = cv(vec![[0.3, -0.2]]);
        let out = qa_multiplier_update(&q, &cv(vec![[1.0, 2.0]]), &cv(vec![[1.0, 2.0]]), 5.0).unwrap();
        assert_eq!(out[0], [0.3, -0.2]);
        // linear in ρ
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mk = |rng: &mut ChaCha8Rng| cv((0..50).map(|_| [rng.random(), rng.random()]).collect());
        let (q, g, p) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        let a = qa_multiplier_update(&q, &g, &p, 1.0).unwrap();
        let b = qa_multiplier_update(&q, &g, &p, 3.0).unwrap();
        for t in 0..50 {
            for k in 0..2 {
                assert!(((b[t][k] - q[t][k]) - 3.0 * (a[t][k] - q[t][k])).abs() < 1e-14);
            }
        }
    }

    fn state(w: Vec<f64>, phi: Vec<[f64; 2]>) -> SolverStateA {
        let n = phi.len();
        SolverStateA {
            w: NodalField(w),
            phi: cv(phi),
            q: CellVectorField::zeros(n),
            w_prev_time: NodalField::zeros(0),
            rho: 1.0,
            iter_count: 0,
        }
    }

    #[test]
    fn convergence_rule() {
        let mesh = generate_square_mesh(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        let (nv, nt) = (mesh.num_vertices(), mesh.num_triangles());
        let stop = StoppingParamsA::default();
        let a = state(vec![1.0; nv], vec![[1.0, 0.0]; nt]);
        assert!(qa_converged(&a, &a.clone(), &mesh, &stop));
        let b = state(vec![1.01; nv], vec![[1.0, 0.0]; nt]);
        assert!(!qa_converged(&a, &b, &mesh, &stop));
        let z = state(vec![0.0; nv], vec![[0.0, 0.0]; nt]);
        assert!(qa_converged(&z, &z.clone(), &mesh, &stop));
        assert!(!qa_converged(&a, &z, &mesh, &stop));
        let c = state(vec![1.0; nv], vec![[1.001, 0.0]; nt]);
        assert!(!qa_converged(&a, &c, &mesh, &stop));
        let d = state(vec![1.0; nv], vec![[1.0001, 0.0]; nt]);
        assert!(qa_converged(&a, &d, &mesh, &stop));
    }

    #[test]
    fn load_integrates_exactly() {
        let mesh = generate_square_mesh(0.0, 1.0, 0.0, 1.0, 0.25).unwrap();
        let f = crate::fem::p1_interpolate(|x| 1.0 + x[0] - 2.0 * x[1], &mesh).unwrap();
        let total: f64 = p1_load(&f, &mesh).unwrap().iter().sum();
        assert!((total - p1_integral(&f, &mesh)).abs() < 1e-14);
    }

    /// One interior node at the centre of the 2×2 grid on the unit square.
    #[test]
    fn single_node_hand_assembly() {
        let mesh = generate_square_mesh(0.0, 1.0, 0.0, 1.0, 0.5).unwrap();
        let support = build_support(&SupportSpec::Flat, &mesh, 0.4).unwrap();
        let params = ModelParams { tau: 1.0, t_final: 1.0, ..ModelParams::default() };
        let f = NodalField(vec![1.0; mesh.num_vertices()]);
        let solver = QaSolver::new(&mesh, &support, &f, params, 1.0, StoppingParamsA::default()).unwrap();
        let mut s = solver.initial_state();
        let centre = (0..9).find(|&v| !mesh.is_boundary_vertex(v)).unwrap();
        // lumped mass of the centre: 6 triangles of area 1/8, a third each
        let m = 6.0 * 0.125 / 3.0;
        // stiffness of the centre hat on this mesh is 4
        let load = p1_load(&f, &mesh).unwrap()[centre];
        // hat integral: 6 triangles × (1/8)/3
        assert!((load - 0.25).abs() < 1e-15);
        let w = solver.linear_substep(&s);
        assert!((w[centre] - load / (m + 4.0)).abs() < 1e-14);
        // φ and Q enter through (ρφ + Q, ∇η)
        s.phi = cv(vec![[1.0, 1.0]; mesh.num_triangles()]);
        let w2 = solver.linear_substep(&s);
        let mut extra = 0.0;
        for t in 0..mesh.num_triangles() {
            let tri = mesh.triangles()[t];
            if let Some(i) = tri.iter().position(|&v| v == centre) {
                let g = mesh.barycentric_gradients(t)[i];
                extra += mesh.area(t) * (g[0] + g[1]);
            }
        }
        assert!((w2[centre] - (load + extra) / (m + 4.0)).abs() < 1e-14);
    }

    #[test]
    fn zero_data_stays_zero() {
        let mesh = generate_square_mesh(-1.0, 1.0, -1.0, 1.0, 0.25).unwrap();
        let support = build_support(&SupportSpec::Flat, &mesh, 0.4).unwrap();
        let f = NodalField::zeros(mesh.num_vertices());
        let solver =
            QaSolver::new(&mesh, &support, &f, ModelParams::default(), 1.0, StoppingParamsA::default()).unwrap();
        let mut s = solver.initial_state();
        let stats = solver.time_step(&mut s).unwrap();
        assert!(stats.iterations <= 2);
        assert!(s.w.iter().all(|v| *v == 0.0) && s.q.iter().all(|v| *v == [0.0, 0.0]));
    }

    /// If W* balances the previous surface with the given Q, then φ = ∇W* makes it a fixed point.
    #[test]
    fn linear_substep_fixed_point() {
        let mesh = generate_square_mesh(-1.0, 1.0, -1.0, 1.0, 0.25).unwrap();
        let support = build_support(&SupportSpec::Flat, &mesh, 0.4).unwrap();
        let f = NodalField(vec![2.0; mesh.num_vertices()]);
        let params = ModelParams::default();
        let solver = QaSolver::new(&mesh, &support, &f, params, 0.5, StoppingParamsA::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = solver.initial_state();
        s.q = cv((0..mesh.num_triangles()).map(|_| [rng.random(), rng.random()]).collect());
        let w_star = NodalField(
            (0..mesh.num_vertices()).map(|v| if mesh.is_boundary_vertex(v) { 0.0 } else { rng.random() }).collect(),
        );
        let mut flux_term = vec![0.0; mesh.num_vertices()];
        for (t, tri) in mesh.triangles().iter().enumerate() {
            let g = mesh.barycentric_gradients(t);
            for i in 0..3 {
                flux_term[tri[i]] += mesh.area(t) * (s.q[t][0] * g[i][0] + s.q[t][1] * g[i][1]);
            }
        }
        let load = p1_load(&f, &mesh).unwrap();
        let mass = mesh.lumped_mass();
        s.w_prev_time = NodalField(
            (0..mesh.num_vertices()).map(|v| w_star[v] - params.tau * (flux_term[v] + load[v]) / mass[v]).collect(),
        );
        s.phi = p1_gradient(&w_star, &mesh).unwrap();
        let w = solver.linear_substep(&s);
        for (a, b) in w.iter().zip(w_star.iter()) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
    }
}
