//! Discontinuous-surface scheme: P0 surface, RT0 flux.
//!
//! Each time step eliminates the surface through `W = g − τ ∇·Q` with
//! `g = W_prev + τ f`, leaving a nonlinear problem for the flux alone. That
//! problem is solved by freezing the `|Q|_δ^{r−2}` weight and the slope bound
//! at the previous iterate, which gives one SPD system per iteration.

use crate::error::{Error, Result};
use crate::fem::{
    check_len, rt0_basis, rt0_divergence, rt0_vertex_values, CellField, EdgeFluxField, Rt0Assembler, VertexWeights,
};
use crate::linalg::{conjugate_gradient, Cholesky, SolveMethod, SolveOptions, SparseSpd};
use crate::material::{m_eps_h, m_eps_point, ModelParams, SupportData};
use crate::mesh::{EdgeTopology, TriMesh};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StoppingParamsB {
    /// Bound on the edge-length weighted relative change of the flux.
    pub tol: f64,
    /// Where the exact flux vanishes everywhere the iterates wander at the
    /// scale of `δ` and the relative test never passes. A step is accepted
    /// as flux-free once `max|Q_e|` stays below this floor after
    /// `zero_min_iters` iterations.
    pub zero_floor: f64,
    pub zero_min_iters: usize,
    pub max_iters: usize,
}

impl Default for StoppingParamsB {
    fn default() -> Self {
        StoppingParamsB { tol: 3e-4, zero_floor: 1e-8, zero_min_iters: 20, max_iters: 500 }
    }
}

impl StoppingParamsB {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !(self.zero_floor >= 0.0) || self.max_iters == 0 {
            return Err(Error::InvalidArgument(format!("stopping parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverStateB {
    pub q: EdgeFluxField,
    pub g: CellField,
    pub w: CellField,
    pub w_prev_time: CellField,
    pub iter_count: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStatsB {
    pub iterations: usize,
    pub rel_change: f64,
}

/// `W_prev + τ f` cellwise.
pub fn qb_gn(w_prev: &CellField, f_cells: &CellField, tau: f64) -> Result<CellField> {
    check_len(w_prev.len(), f_cells.len())?;
    Ok(CellField(w_prev.iter().zip(f_cells.iter()).map(|(w, f)| w + tau * f).collect()))
}

/// `g − τ ∇·Q` cellwise.
pub fn qb_recover_w(
    g: &CellField,
    tau: f64,
    q: &EdgeFluxField,
    mesh: &TriMesh,
    topo: &EdgeTopology,
) -> Result<CellField> {
    check_len(mesh.num_triangles(), g.len())?;
    let div = rt0_divergence(q, mesh, topo)?;
    Ok(CellField(g.iter().zip(div.iter()).map(|(g, d)| g - tau * d).collect()))
}

/// `(|q|² + δ²)^{(r−2)/2}`.
#[inline]
fn smoothed_power(q: [f64; 2], params: &ModelParams) -> f64 {
    (q[0] * q[0] + q[1] * q[1] + params.delta * params.delta).powf((params.r - 2.0) / 2.0)
}

/// Corner weights `M_ε^h(g − τ∇·Q) |Q(P_j)|_δ^{r−2}` of the flux system.
pub fn qb_weights(
    g: &CellField,
    q: &EdgeFluxField,
    support: &SupportData,
    params: &ModelParams,
    mesh: &TriMesh,
    topo: &EdgeTopology,
) -> Result<VertexWeights> {
    let w = qb_recover_w(g, params.tau, q, mesh, topo)?;
    let m = m_eps_h(&w, support, params);
    Ok((0..mesh.num_triangles())
        .map(|t| {
            let v = rt0_vertex_values(q, mesh, topo, t);
            std::array::from_fn(|j| m[t] * smoothed_power(v[j], params))
        })
        .collect())
}

/// Right-hand side of the flux system for the frozen iterate `q`.
pub fn qb_rhs(
    g: &CellField,
    q: &EdgeFluxField,
    support: &SupportData,
    params: &ModelParams,
    mesh: &TriMesh,
    topo: &EdgeTopology,
) -> Result<Vec<f64>> {
    let w = qb_recover_w(g, params.tau, q, mesh, topo)?;
    let mut rhs = vec![0.0; topo.num_edges()];
    for t in 0..mesh.num_triangles() {
        let m = m_eps_point(w[t], support.w0h_cell[t], support.k1h_cell[t], params.k0, params.eps);
        let corners = mesh.corners(t);
        let v = rt0_vertex_values(q, mesh, topo, t);
        // M (|Q|_δ^{r−2} − |Q|^{r−2}) at each corner; the product with Q is 0 at Q = 0
        let c: [f64; 3] = std::array::from_fn(|j| {
            let len = v[j][0].hypot(v[j][1]);
            if len > 0.0 {
                m * (smoothed_power(v[j], params) - len.powf(params.r - 2.0))
            } else {
                0.0
            }
        });
        let area = mesh.area(t);
        for (i, le) in topo.triangle_edges(t).iter().enumerate() {
            let mut acc = 0.0;
            for j in 0..3 {
                let psi = rt0_basis(mesh, t, i, corners[j]);
                acc += c[j] * (v[j][0] * psi[0] + v[j][1] * psi[1]);
            }
            rhs[le.edge] += le.sign * (area / 3.0 * acc + g[t] * topo.length(le.edge));
        }
    }
    Ok(rhs)
}

/// `Σ|e||ΔQ_e| / Σ|e||Q_e|`, with 0 (or ∞) for a zero denominator.
pub fn qb_relative_change(q_prev: &EdgeFluxField, q_curr: &EdgeFluxField, topo: &EdgeTopology) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for ((a, b), l) in q_prev.iter().zip(q_curr.iter()).zip(topo.lengths()) {
        num += l * (b - a).abs();
        den += l * b.abs();
    }
    if den > 0.0 {
        num / den
    } else if num == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

pub fn qb_converged(q_prev: &EdgeFluxField, q_curr: &EdgeFluxField, topo: &EdgeTopology, tol: f64) -> bool {
    qb_relative_change(q_prev, q_curr, topo) < tol
}

/// Time stepper for the discontinuous-surface scheme.
pub struct QbSolver<'a> {
    mesh: &'a TriMesh,
    topo: &'a EdgeTopology,
    support: &'a SupportData,
    source: CellField,
    params: ModelParams,
    stopping: StoppingParamsB,
    solve: SolveOptions,
    assembler: Rt0Assembler,
    matrix: SparseSpd,
    factor: Option<Cholesky>,
}

impl<'a> QbSolver<'a> {
    pub fn new(
        mesh: &'a TriMesh,
        topo: &'a EdgeTopology,
        support: &'a SupportData,
        source: &CellField,
        params: ModelParams,
        stopping: StoppingParamsB,
        solve: SolveOptions,
    ) -> Result<Self> {
        params.validate()?;
        stopping.validate()?;
        solve.validate()?;
        check_len(mesh.num_triangles(), source.len())?;
        check_len(mesh.num_triangles(), support.w0h_cell.len())?;
        check_len(mesh.num_triangles(), topo.num_triangles())?;
        let assembler = Rt0Assembler::new(mesh, topo);
        let ones = vec![[1.0; 3]; mesh.num_triangles()];
        let matrix = assembler.assemble(mesh, topo, &ones, params.tau)?;
        Ok(QbSolver {
            mesh,
            topo,
            support,
            source: source.clone(),
            params,
            stopping,
            solve,
            assembler,
            matrix,
            factor: None,
        })
    }

    /// `W^0 = P^h π^h w0`, `Q = 0`.
    pub fn initial_state(&self) -> SolverStateB {
        let w0 = self.support.w0h_cell.clone();
        SolverStateB {
            q: EdgeFluxField::zeros(self.topo.num_edges()),
            g: w0.clone(),
            w: w0.clone(),
            w_prev_time: w0,
            iter_count: 0,
        }
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// One linearized iteration from the flux of `state`.
    pub fn iterate(&mut self, state: &SolverStateB) -> Result<EdgeFluxField> {
        let (mesh, topo) = (self.mesh, self.topo);
        let weights = qb_weights(&state.g, &state.q, self.support, &self.params, mesh, topo)?;
        self.assembler.assemble_into(mesh, topo, &weights, self.params.tau, &mut self.matrix)?;
        let rhs = qb_rhs(&state.g, &state.q, self.support, &self.params, mesh, topo)?;
        let x = match self.solve.method {
            SolveMethod::DirectCholesky => {
                match self.factor.as_mut() {
                    Some(f) => f.refactor(&self.matrix)?,
                    None => self.factor = Some(Cholesky::factor(&self.matrix)?),
                }
                self.factor.as_ref().expect("factor present").solve(&rhs)
            }
            SolveMethod::ConjugateGradient => {
                conjugate_gradient(&self.matrix, &rhs, Some(&state.q), self.solve.cg_rel_tol, self.solve.cg_max_iter)?.x
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite flux iterate".into()));
        }
        Ok(EdgeFluxField(x))
    }

    /// Advance `state` by one time step, warm starting from its flux.
    pub fn time_step(&mut self, state: &mut SolverStateB) -> Result<StepStatsB> {
        state.w_prev_time = state.w.clone();
        state.g = qb_gn(&state.w_prev_time, &self.source, self.params.tau)?;
        state.iter_count = 0;
        let mut change = f64::INFINITY;
        for _ in 0..self.stopping.max_iters {
            let next = self.iterate(state)?;
            change = qb_relative_change(&state.q, &next, self.topo);
            state.q = next;
            state.iter_count += 1;
            let settled = state.iter_count >= self.stopping.zero_min_iters
                && state.q.iter().all(|v| v.abs() <= self.stopping.zero_floor);
            if change < self.stopping.tol || settled {
                state.w = qb_recover_w(&state.g, self.params.tau, &state.q, self.mesh, self.topo)?;
                return Ok(StepStatsB { iterations: state.iter_count, rel_change: change });
            }
        }
        state.w = qb_recover_w(&state.g, self.params.tau, &state.q, self.mesh, self.topo)?;
        Err(Error::NonConvergence {
            step: 0,
            iterations: self.stopping.max_iters,
            detail: format!("relative flux change {change:.3e}; a smaller time step usually helps"),
        })
    }
}
