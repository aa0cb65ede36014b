//! End-to-end scenario driver: mesh, data, time loop, errors, outputs.

use std::path::Path;
use std::time::Instant;

use crate::analytic::{rel_l1_error_cells, rel_l1_error_flux, rel_l1_error_nodal, ConePile, FlatPile, RadialSolution};
use crate::error::{Error, Result};
use crate::export::{write_csv, write_vtk, VtkField};
use crate::fem::{
    cell_integral, p0_project_nodal, p1_gradient, p1_integral, rt0_cell_vectors, rt0_divergence, CellField,
    CellVectorField, EdgeFluxField, NodalField,
};
use crate::material::{build_support, source_field_cells, source_field_nodes, SupportData, SupportSpec};
use crate::mesh::{build_edge_topology, generate_disk_mesh, generate_square_mesh, load_mesh, EdgeTopology, TriMesh};
use crate::solver_a::QaSolver;
use crate::solver_b::QbSolver;

use super::config::{Benchmark, Domain, MeshSource, ScenarioConfig, SolverConfig};

/// Per-step diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub iterations: usize,
    /// Last value of the stopping criterion (relative change of `W` for A, of `Q` for B).
    pub rel_change: f64,
    /// `max(|∇W| − M)` over cells (A only).
    pub gradient_excess: Option<f64>,
    /// Relative complementarity residual (A only).
    pub complementarity: Option<f64>,
    /// `max |W − W_prev − τ f + τ div Q|` over cells (B only).
    pub balance: Option<f64>,
    pub max_height: f64,
}

/// Diagnostics recorded at a snapshot time.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    /// `∫W dx`.
    pub volume: f64,
    /// `∫(W − w0) dx`.
    pub sand_volume: f64,
    /// Largest cell-center flux magnitude and the cell where it occurs.
    pub max_flux: f64,
    pub max_flux_cell: usize,
    pub surface_error: Option<f64>,
    pub flux_error: Option<f64>,
    /// Splitting or linearized iterations summed over all steps so far.
    pub total_iterations: usize,
    pub wall_seconds: f64,
}

/// Worst values of the runtime monitors over all steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Monitors {
    pub max_gradient_excess: Option<f64>,
    pub max_complementarity: Option<f64>,
    pub max_balance: Option<f64>,
    pub max_height: f64,
    /// Heuristic bound `max w0 + T max f |Ω|` on `max W`.
    pub height_bound: f64,
}

impl Monitors {
    pub const GRADIENT_TOL: f64 = 1e-6;
    pub const COMPLEMENTARITY_TOL: f64 = 1e-5;
    pub const BALANCE_TOL: f64 = 1e-13;

    /// Human-readable list of failed monitors; empty when all pass.
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(g) = self.max_gradient_excess.filter(|g| !(*g <= Self::GRADIENT_TOL)) {
            out.push(format!("gradient bound exceeded by {g:.3e}"));
        }
        if let Some(c) = self.max_complementarity.filter(|c| !(*c <= Self::COMPLEMENTARITY_TOL)) {
            out.push(format!("complementarity residual {c:.3e}"));
        }
        if let Some(b) = self.max_balance.filter(|b| !(*b <= Self::BALANCE_TOL)) {
            out.push(format!("cellwise balance residual {b:.3e}"));
        }
        if !(self.max_height <= self.height_bound) {
            out.push(format!("max height {:.3e} above bound {:.3e}", self.max_height, self.height_bound));
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorReport {
    pub scenario: String,
    pub solver: &'static str,
    pub snapshots: Vec<Snapshot>,
    pub steps: Vec<StepRecord>,
    pub monitors: Monitors,
    pub wall_seconds: f64,
}

impl ErrorReport {
    pub fn last(&self) -> Option<&Snapshot> {
        self.snapshots.last()
    }
}

/// Final discrete fields of a run.
#[derive(Debug, Clone)]
pub enum FinalFields {
    A { w: NodalField, q: CellVectorField, phi: CellVectorField },
    B { w: CellField, q: EdgeFluxField, q_cells: CellVectorField },
}

impl FinalFields {
    /// Cell-center flux vectors.
    pub fn cell_flux(&self) -> &CellVectorField {
        match self {
            FinalFields::A { q, .. } => q,
            FinalFields::B { q_cells, .. } => q_cells,
        }
    }
}

pub struct RunOutcome {
    pub report: ErrorReport,
    pub mesh: TriMesh,
    pub support: SupportData,
    pub fields: FinalFields,
}

pub fn build_mesh(cfg: &ScenarioConfig) -> Result<TriMesh> {
    match (&cfg.mesh, cfg.domain) {
        (MeshSource::File(path), _) => load_mesh(path),
        (MeshSource::Generated { h }, Domain::Disk { radius }) => generate_disk_mesh(radius, *h),
        (MeshSource::Generated { h }, Domain::Square { bounds: [x0, x1, y0, y1] }) => {
            generate_square_mesh(x0, x1, y0, y1, *h)
        }
    }
}

/// The reference solution of a benchmark at time `t`, with the scenario's parameters.
pub fn reference_solution(cfg: &ScenarioConfig, bench: Benchmark, t: f64) -> Result<RadialSolution> {
    use crate::material::SourceSpec;
    let (r0, rate) = match cfg.source {
        SourceSpec::UniformDisk { radius, total_rate, .. } => (radius, total_rate),
        SourceSpec::Constant { .. } => {
            return Err(Error::InvalidArgument("benchmarks need a disk source".into()));
        }
    };
    let k0 = cfg.params.k0;
    match bench {
        Benchmark::FlatPile => FlatPile { k0, r0, rate }.at(t),
        Benchmark::ConePile => {
            let cone = match cfg.support {
                SupportSpec::Cone { height, .. } => height,
                _ => return Err(Error::InvalidArgument("the cone benchmark needs a cone support".into())),
            };
            ConePile { k0, r0, rate, cone }.at(t)
        }
    }
}

struct Ctx<'a> {
    cfg: &'a ScenarioConfig,
    mesh: &'a TriMesh,
    support: &'a SupportData,
    out_dir: Option<&'a Path>,
    start: Instant,
}

impl Ctx<'_> {
    fn stem(&self, step: usize) -> String {
        format!("{}_step{step:05}", self.cfg.name)
    }

    fn max_flux(&self, q: &CellVectorField) -> (f64, usize) {
        let mut best = (0.0, 0);
        for (t, v) in q.iter().enumerate() {
            let m = v[0].hypot(v[1]);
            if m > best.0 {
                best = (m, t);
            }
        }
        best
    }

    fn radial_rows(
        &self,
        points: impl Iterator<Item = [f64; 2]>,
        values: impl Iterator<Item = f64>,
        exact: impl Fn([f64; 2]) -> f64,
    ) -> Vec<Vec<Option<f64>>> {
        let mut rows: Vec<(f64, f64, f64)> = points.zip(values).map(|(p, v)| (p[0].hypot(p[1]), exact(p), v)).collect();
        rows.sort_by(|a, b| a.0.total_cmp(&b.0));
        rows.into_iter().map(|(r, e, v)| vec![Some(r), Some(e), Some(v)]).collect()
    }

    /// Errors against the benchmark plus radial profile output.
    fn snapshot(
        &self,
        step: usize,
        surface: Surface,
        q: &CellVectorField,
        total_iterations: usize,
        extra_vtk: &[VtkField],
    ) -> Result<Snapshot> {
        let t = step as f64 * self.cfg.params.tau;
        let (mesh, w0) = (self.mesh, self.support);
        let (volume, sand_volume) = match surface {
            Surface::Nodal(w) => (p1_integral(w, mesh), p1_integral(w, mesh) - p1_integral(&w0.w0_nodal, mesh)),
            Surface::Cells(w) => (cell_integral(w, mesh), cell_integral(w, mesh) - cell_integral(&w0.w0h_cell, mesh)),
        };
        let (max_flux, max_flux_cell) = self.max_flux(q);
        let reference = match self.cfg.analytic {
            Some(b) if step > 0 => Some(reference_solution(self.cfg, b, t)?),
            _ => None,
        };
        let (mut surface_error, mut flux_error) = (None, None);
        if let Some(sol) = &reference {
            surface_error = Some(match surface {
                Surface::Nodal(w) => rel_l1_error_nodal(w, |x| sol.surface_at(x), mesh)?,
                Surface::Cells(w) => rel_l1_error_cells(w, |x| sol.surface_at(x), mesh)?,
            });
            flux_error = Some(rel_l1_error_flux(q, |x| sol.flux_at(x), mesh)?);
        }
        if let Some(dir) = self.out_dir {
            let stem = self.stem(step);
            if self.cfg.output.vtk() {
                let mut fields = vec![match surface {
                    Surface::Nodal(w) => VtkField::Point("W", w.values()),
                    Surface::Cells(w) => VtkField::Cell("W", w.values()),
                }];
                fields.push(VtkField::CellVector("Q", q.values()));
                fields.extend_from_slice(extra_vtk);
                let title = format!("{} t={t}", self.cfg.name);
                write_vtk(dir.join(format!("{stem}.vtk")), mesh, &title, &fields)?;
            }
            if self.cfg.output.csv() {
                if let Some(sol) = &reference {
                    let rows = match surface {
                        Surface::Nodal(w) => {
                            self.radial_rows(mesh.vertices().iter().copied(), w.iter().copied(), |x| sol.surface_at(x))
                        }
                        Surface::Cells(w) => self.radial_rows(
                            (0..mesh.num_triangles()).map(|c| mesh.centroid(c)),
                            w.iter().copied(),
                            |x| sol.surface_at(x),
                        ),
                    };
                    write_csv(dir.join(format!("{stem}_surface.csv")), &["R", "w_exact", "w_numeric"], &rows)?;
                    let rows = self.radial_rows(
                        (0..mesh.num_triangles()).map(|c| mesh.centroid(c)),
                        q.iter().map(|v| v[0].hypot(v[1])),
                        |x| {
                            let f = sol.flux_at(x);
                            f[0].hypot(f[1])
                        },
                    );
                    write_csv(dir.join(format!("{stem}_flux.csv")), &["R", "q_exact", "q_numeric"], &rows)?;
                }
            }
        }
        Ok(Snapshot {
            step,
            t,
            volume,
            sand_volume,
            max_flux,
            max_flux_cell,
            surface_error,
            flux_error,
            total_iterations,
            wall_seconds: self.start.elapsed().as_secs_f64(),
        })
    }

    fn height_bound(&self, f_max: f64) -> f64 {
        let w0max = self.support.w0_nodal.iter().fold(0.0f64, |m, v| m.max(*v));
        w0max + self.cfg.params.t_final * f_max * self.mesh.total_area()
    }
}

#[derive(Clone, Copy)]
enum Surface<'a> {
    Nodal(&'a NodalField),
    Cells(&'a CellField),
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// Largest value, NaN if any entry is not finite.
fn max_value(v: &[f64]) -> f64 {
    v.iter().fold(f64::NEG_INFINITY, |m, x| if x.is_finite() && !m.is_nan() { m.max(*x) } else { f64::NAN })
}

fn worst(acc: Option<f64>, x: f64) -> Option<f64> {
    Some(match acc {
        _ if x.is_nan() => f64::NAN,
        Some(a) if a.is_nan() => a,
        Some(a) => a.max(x),
        None => x,
    })
}

/// Run a scenario. Outputs go to `out_dir` unless it is `None` or the scenario disables them.
pub fn run_scenario(cfg: &ScenarioConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    cfg.validate()?;
    let start = Instant::now();
    let mesh = build_mesh(cfg)?;
    let support = build_support(&cfg.support, &mesh, cfg.params.k0)?;
    let out_dir = out_dir.filter(|_| cfg.output.csv() || cfg.output.vtk());
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let ctx = Ctx { cfg, mesh: &mesh, support: &support, out_dir, start };
    let snapshot_steps = cfg.snapshot_steps();
    let n = cfg.num_steps();
    let mut steps = Vec::with_capacity(n);
    let mut snapshots = Vec::new();
    let mut total_iterations = 0;
    let (fields, monitors) = match cfg.solver {
        SolverConfig::A { rho, stopping } => {
            let source = source_field_nodes(&cfg.source, &mesh)?;
            let solver = QaSolver::new(&mesh, &support, &source, cfg.params, rho, stopping)?;
            let mut state = solver.initial_state();
            let mut mon = Monitors {
                max_gradient_excess: None,
                max_complementarity: None,
                max_balance: None,
                max_height: max_value(state.w.values()),
                height_bound: ctx.height_bound(max_abs(source.values())),
            };
            if snapshot_steps.contains(&0) {
                snapshots.push(ctx.snapshot(0, Surface::Nodal(&state.w), &state.q, 0, &[])?);
            }
            for step in 1..=n {
                let stats = solver.time_step(&mut state).map_err(|e| e.at_step(step))?;
                total_iterations += stats.iterations;
                let h = max_value(state.w.values());
                mon.max_gradient_excess = worst(mon.max_gradient_excess, stats.gradient_excess);
                mon.max_complementarity = worst(mon.max_complementarity, stats.complementarity);
                mon.max_height = worst(Some(mon.max_height), h).unwrap_or(h);
                log::debug!("{} step {step}: {} iterations", cfg.name, stats.iterations);
                steps.push(StepRecord {
                    step,
                    t: step as f64 * cfg.params.tau,
                    iterations: stats.iterations,
                    rel_change: stats.rel_change_w,
                    gradient_excess: Some(stats.gradient_excess),
                    complementarity: Some(stats.complementarity),
                    balance: None,
                    max_height: h,
                });
                if snapshot_steps.contains(&step) {
                    let grad = p1_gradient(&state.w, &mesh)?;
                    let mh = solver.slope_bound(&state.w);
                    let extra = [VtkField::CellVector("grad_W", grad.values()), VtkField::Cell("M", mh.values())];
                    snapshots.push(ctx.snapshot(step, Surface::Nodal(&state.w), &state.q, total_iterations, &extra)?);
                }
            }
            (FinalFields::A { w: state.w, q: state.q, phi: state.phi }, mon)
        }
        SolverConfig::B { stopping, linear } => {
            let topo = build_edge_topology(&mesh)?;
            let source = source_field_cells(&cfg.source, &mesh)?;
            let mut solver = QbSolver::new(&mesh, &topo, &support, &source, cfg.params, stopping, linear)?;
            let mut state = solver.initial_state();
            let mut mon = Monitors {
                max_gradient_excess: None,
                max_complementarity: None,
                max_balance: None,
                max_height: max_value(state.w.values()),
                height_bound: ctx.height_bound(max_abs(source.values())),
            };
            let mut q_cells = rt0_cell_vectors(&state.q, &mesh, &topo);
            if snapshot_steps.contains(&0) {
                snapshots.push(ctx.snapshot(0, Surface::Cells(&state.w), &q_cells, 0, &[])?);
            }
            for step in 1..=n {
                let stats = solver.time_step(&mut state).map_err(|e| e.at_step(step))?;
                total_iterations += stats.iterations;
                let balance =
                    balance_residual(&state.w, &state.w_prev_time, &source, &state.q, cfg.params.tau, &mesh, &topo)?;
                let h = max_value(state.w.values());
                mon.max_balance = worst(mon.max_balance, balance);
                mon.max_height = worst(Some(mon.max_height), h).unwrap_or(h);
                log::debug!("{} step {step}: {} iterations", cfg.name, stats.iterations);
                steps.push(StepRecord {
                    step,
                    t: step as f64 * cfg.params.tau,
                    iterations: stats.iterations,
                    rel_change: stats.rel_change,
                    gradient_excess: None,
                    complementarity: None,
                    balance: Some(balance),
                    max_height: h,
                });
                if snapshot_steps.contains(&step) {
                    q_cells = rt0_cell_vectors(&state.q, &mesh, &topo);
                    snapshots.push(ctx.snapshot(step, Surface::Cells(&state.w), &q_cells, total_iterations, &[])?);
                }
            }
            let q_cells = rt0_cell_vectors(&state.q, &mesh, &topo);
            (FinalFields::B { w: state.w, q: state.q, q_cells }, mon)
        }
    };
    let report = ErrorReport {
        scenario: cfg.name.clone(),
        solver: cfg.solver.label(),
        snapshots,
        steps,
        monitors,
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    if let Some(dir) = out_dir.filter(|_| cfg.output.csv()) {
        write_report_csv(&report, dir)?;
    }
    Ok(RunOutcome { report, mesh, support, fields })
}

/// Cellwise mass balance of one flux-scheme step, in height units.
pub fn balance_residual(
    w: &CellField,
    w_prev: &CellField,
    f: &CellField,
    q: &EdgeFluxField,
    tau: f64,
    mesh: &TriMesh,
    topo: &EdgeTopology,
) -> Result<f64> {
    let div = rt0_divergence(q, mesh, topo)?;
    let mut worst_r = 0.0f64;
    for c in 0..mesh.num_triangles() {
        let r = (w[c] - w_prev[c] - tau * f[c] + tau * div[c]).abs();
        if r.is_nan() {
            return Ok(f64::NAN);
        }
        worst_r = worst_r.max(r);
    }
    Ok(worst_r)
}

/// `<name>_report.csv` (snapshots) and `<name>_steps.csv` (per-step diagnostics).
/// Wall times are left out so identical runs give identical files.
pub fn write_report_csv(report: &ErrorReport, dir: &Path) -> Result<()> {
    let rows: Vec<Vec<Option<f64>>> = report
        .snapshots
        .iter()
        .map(|s| {
            vec![
                Some(s.step as f64),
                Some(s.t),
                s.surface_error,
                s.flux_error,
                Some(s.volume),
                Some(s.sand_volume),
                Some(s.max_flux),
                Some(s.max_flux_cell as f64),
                Some(s.total_iterations as f64),
            ]
        })
        .collect();
    write_csv(
        dir.join(format!("{}_report.csv", report.scenario)),
        &[
            "step",
            "t",
            "surface_error",
            "flux_error",
            "volume",
            "sand_volume",
            "max_flux",
            "max_flux_cell",
            "total_iterations",
        ],
        &rows,
    )?;
    let rows: Vec<Vec<Option<f64>>> = report
        .steps
        .iter()
        .map(|s| {
            vec![
                Some(s.step as f64),
                Some(s.t),
                Some(s.iterations as f64),
                Some(s.rel_change),
                s.gradient_excess,
                s.complementarity,
                s.balance,
                Some(s.max_height),
            ]
        })
        .collect();
    write_csv(
        dir.join(format!("{}_steps.csv", report.scenario)),
        &["step", "t", "iterations", "rel_change", "gradient_excess", "complementarity", "balance", "max_height"],
        &rows,
    )
}

/// `P^h` of a nodal surface, for comparing the two schemes on cells.
pub fn surface_on_cells(fields: &FinalFields, mesh: &TriMesh) -> Result<CellField> {
    match fields {
        FinalFields::A { w, .. } => p0_project_nodal(w, mesh),
        FinalFields::B { w, .. } => Ok(w.clone()),
    }
}
