use sandpile::fem::{cell_vector_inner, lumped_inner, p1_gradient, CellVectorField, NodalField};
use sandpile::material::{build_support, source_field_nodes, ModelParams, SourceSpec, SupportData, SupportSpec};
use sandpile::mesh::{generate_disk_mesh, TriMesh};
use sandpile::solver_a::{p1_load, QaSolver, SolverStateA, StoppingParamsA};

fn setup(h: f64) -> (TriMesh, SupportData, NodalField) {
    let mesh = generate_disk_mesh(1.0, h).unwrap();
    let support = build_support(&SupportSpec::Flat, &mesh, 0.4).unwrap();
    let src = SourceSpec::UniformDisk { center: [0.0, 0.0], radius: 0.2, total_rate: 1.0 };
    let f = source_field_nodes(&src, &mesh).unwrap();
    (mesh, support, f)
}

fn params() -> ModelParams {
    ModelParams { tau: 0.01, t_final: 0.05, ..ModelParams::default() }
}

fn sub(a: &CellVectorField, b: &CellVectorField) -> CellVectorField {
    CellVectorField(a.iter().zip(b.iter()).map(|(x, y)| [x[0] - y[0], x[1] - y[1]]).collect())
}

/// `(v, ∇λ_i)` for every vertex `i`.
fn pair_with_hats(v: &CellVectorField, mesh: &TriMesh) -> Vec<f64> {
    let mut out = vec![0.0; mesh.num_vertices()];
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = mesh.barycentric_gradients(t);
        for i in 0..3 {
            out[tri[i]] += mesh.area(t) * (v[t][0] * g[i][0] + v[t][1] * g[i][1]);
        }
    }
    out
}

/// The discrete balance law misses only the last change of the auxiliary
/// gradient: `(W − W_prev, η)^h/τ − (Q, ∇η) − (f, η) = ρ(φ_prev − φ, ∇η)`.
#[test]
fn balance_residual_is_the_last_auxiliary_change() {
    let (mesh, support, f) = setup(0.1);
    let p = params();
    let solver = QaSolver::new(&mesh, &support, &f, p, 1.0, StoppingParamsA::default()).unwrap();
    let load = p1_load(&f, &mesh).unwrap();
    let mass = mesh.lumped_mass();
    let mut state = solver.initial_state();
    for _ in 0..p.num_steps() {
        let mut phis: Vec<CellVectorField> = vec![state.phi.clone()];
        solver.time_step_observed(&mut state, |s| phis.push(s.phi.clone())).unwrap();
        let phi_prev = &phis[phis.len() - 2];
        let flux = pair_with_hats(&state.q, &mesh);
        let gap = pair_with_hats(&sub(phi_prev, &state.phi), &mesh);
        let mut scale: f64 = 0.0;
        for v in 0..mesh.num_vertices() {
            scale = scale.max(load[v].abs()).max(flux[v].abs());
        }
        for v in (0..mesh.num_vertices()).filter(|&v| !mesh.is_boundary_vertex(v)) {
            let residual = mass[v] * (state.w[v] - state.w_prev_time[v]) / p.tau - flux[v] - load[v];
            assert!((residual - gap[v]).abs() <= 1e-10 * scale, "vertex {v}: {residual:e} vs {:e}", gap[v]);
        }
    }
}

/// Iterating to full convergence makes the gradient bound, complementarity
/// and colinearity of `Q` with `−∇W` hold to tight tolerances.
#[test]
fn converged_steps_satisfy_the_constraints() {
    let (mesh, support, f) = setup(0.1);
    let p = params();
    let stopping = StoppingParamsA { tol_gradient: Some(1e-7), max_iters: 50_000, ..StoppingParamsA::default() };
    let solver = QaSolver::new(&mesh, &support, &f, p, 1.0, stopping).unwrap();
    let mut state = solver.initial_state();
    let mut flowing = 0;
    for step in 1..=p.num_steps() {
        let stats = solver.time_step(&mut state).unwrap();
        assert!(stats.gradient_excess <= 1e-6, "step {step}: {:e}", stats.gradient_excess);
        assert!(stats.complementarity <= 1e-5, "step {step}: {:e}", stats.complementarity);

        let grad = p1_gradient(&state.w, &mesh).unwrap();
        let qmax = state.q.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
        flowing += usize::from(qmax > 0.0);
        for t in 0..mesh.num_triangles() {
            let (q, g) = (state.q[t], grad[t]);
            let qn = q[0].hypot(q[1]);
            if qn <= 1e-8 * qmax {
                continue;
            }
            let gn = g[0].hypot(g[1]);
            let cos = -(q[0] * g[0] + q[1] * g[1]) / (qn * gn);
            assert!(cos.clamp(-1.0, 1.0).acos() <= 1e-3, "step {step}, cell {t}");
            let lambda = -(q[0] * g[0] + q[1] * g[1]) / (gn * gn);
            assert!(lambda >= -1e-10);
        }
    }
    assert!(flowing >= 3);
}

/// With a flat support the splitting iteration is a contraction toward the
/// solution of the step in the weighted distance `|Q̃|² + ρ²|φ̃|²`.
#[test]
fn flat_support_lyapunov_decrease() {
    let (mesh, support, f) = setup(0.1);
    let p = params();
    let rho = 1.0;
    let solver = QaSolver::new(&mesh, &support, &f, p, rho, StoppingParamsA::default()).unwrap();
    let mut start = solver.initial_state();
    for _ in 0..2 {
        solver.time_step(&mut start).unwrap();
    }
    start.w_prev_time = start.w.clone();
    let mut limit = start.clone();
    for _ in 0..30_000 {
        limit = solver.iterate(&limit);
    }
    let dist = |s: &SolverStateA| {
        let dq = sub(&s.q, &limit.q);
        let dphi = sub(&s.phi, &limit.phi);
        cell_vector_inner(&dq, &dq, &mesh) + rho * rho * cell_vector_inner(&dphi, &dphi, &mesh)
    };
    let mut s = start;
    let mut prev = dist(&s);
    let first = prev;
    let mut checked = 0;
    for _ in 0..3000 {
        s = solver.iterate(&s);
        let d = dist(&s);
        if prev < 1e-12 * first {
            break;
        }
        let dw = NodalField(s.w.iter().zip(limit.w.iter()).map(|(a, b)| a - b).collect());
        let gain = 2.0 * rho / p.tau * lumped_inner(&dw, &dw, &mesh).unwrap();
        assert!(d <= prev * (1.0 + 1e-10), "iteration {}: {d:e} after {prev:e}", s.iter_count);
        assert!(prev - d >= gain * (1.0 - 1e-6) - 1e-10 * prev, "iteration {}", s.iter_count);
        prev = d;
        checked += 1;
    }
    assert!(checked > 10);
}
