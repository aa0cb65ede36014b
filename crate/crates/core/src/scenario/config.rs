//! Flat `key = value` scenario files.
//!
//! ```text
//! # example 1, flux scheme
//! name = ex1-qb-h04
//! domain = disk
//! domain.radius = 1
//! mesh.h = 0.04
//! support = flat
//! source = disk
//! source.radius = 0.2
//! source.rate = 1
//! model.tau = 0.005
//! model.t_final = 0.1
//! solver = B
//! analytic = ex1
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::linalg::{SolveMethod, SolveOptions};
use crate::material::{ModelParams, SourceSpec, SupportSpec};
use crate::solver_a::StoppingParamsA;
use crate::solver_b::StoppingParamsB;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Domain {
    Disk {
        radius: f64,
    },
    /// `[xmin, xmax, ymin, ymax]`.
    Square {
        bounds: [f64; 4],
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum MeshSource {
    Generated { h: f64 },
    File(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SolverConfig {
    A { rho: f64, stopping: StoppingParamsA },
    B { stopping: StoppingParamsB, linear: SolveOptions },
}

impl SolverConfig {
    pub fn label(&self) -> &'static str {
        match self {
            SolverConfig::A { .. } => "A",
            SolverConfig::B { .. } => "B",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Vtk,
    Both,
    None,
}

impl OutputFormat {
    pub fn csv(self) -> bool {
        matches!(self, OutputFormat::Csv | OutputFormat::Both)
    }

    pub fn vtk(self) -> bool {
        matches!(self, OutputFormat::Vtk | OutputFormat::Both)
    }

    fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Vtk => "vtk",
            OutputFormat::Both => "both",
            OutputFormat::None => "none",
        }
    }
}

/// Reference solution to compare against.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Benchmark {
    /// Pile over a flat support.
    FlatPile,
    /// Pile around a conical support.
    ConePile,
}

impl Benchmark {
    fn name(self) -> &'static str {
        match self {
            Benchmark::FlatPile => "ex1",
            Benchmark::ConePile => "ex3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: Domain,
    pub mesh: MeshSource,
    pub support: SupportSpec,
    pub source: SourceSpec,
    pub params: ModelParams,
    pub solver: SolverConfig,
    pub output: OutputFormat,
    /// Times at which fields and errors are recorded; always includes `t_final`.
    pub snapshots: Vec<f64>,
    pub analytic: Option<Benchmark>,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let p = &self.params;
        let model_key = |e: Error| match e {
            Error::InvalidArgument(msg) => {
                let key = msg.split(':').next().unwrap_or("").to_string();
                Error::config(format!("model.{key}"), msg)
            }
            other => other,
        };
        p.validate().map_err(model_key)?;
        match self.domain {
            Domain::Disk { radius } if !(radius > 0.0) => {
                return Err(Error::config("domain.radius", format!("{radius} must be positive")));
            }
            Domain::Square { bounds: [x0, x1, y0, y1] } if !(x1 > x0 && y1 > y0) => {
                return Err(Error::config("domain.bounds", "need xmin < xmax and ymin < ymax"));
            }
            _ => {}
        }
        if let MeshSource::Generated { h } = self.mesh {
            if !(h > 0.0) {
                return Err(Error::config("mesh.h", format!("{h} must be positive")));
            }
        }
        self.source.validate().map_err(|e| Error::config("source", e.to_string()))?;
        if let SupportSpec::InvertedPyramid { margin } = self.support {
            if !(0.0..1.0).contains(&margin) {
                return Err(Error::config("support.margin", format!("{margin} must lie in [0, 1)")));
            }
        }
        match self.solver {
            SolverConfig::A { rho, stopping } => {
                if !(rho > 0.0) {
                    return Err(Error::config("solver.rho", format!("{rho} must be positive")));
                }
                stopping.validate().map_err(|e| Error::config("solver", e.to_string()))?;
            }
            SolverConfig::B { stopping, linear } => {
                stopping.validate().map_err(|e| Error::config("solver", e.to_string()))?;
                linear.validate().map_err(|e| Error::config("solver.linear", e.to_string()))?;
            }
        }
        let steps = p.t_final / p.tau;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::config(
                "model.t_final",
                format!("{} is not a whole number of time steps of {}", p.t_final, p.tau),
            ));
        }
        for &t in &self.snapshots {
            let k = (t / p.tau).round();
            if !(t > 0.0) || (t - k * p.tau).abs() > 1e-12 * t.max(1.0) || t > p.t_final * (1.0 + 1e-12) {
                return Err(Error::config(
                    "output.snapshots",
                    format!("{t} is not a positive multiple of tau = {} within t_final", p.tau),
                ));
            }
        }
        match self.analytic {
            Some(Benchmark::FlatPile) => {
                if self.support != SupportSpec::Flat {
                    return Err(Error::config("analytic", "ex1 needs a flat support"));
                }
                self.check_centred_source()?;
            }
            Some(Benchmark::ConePile) => {
                match self.support {
                    SupportSpec::Cone { center: [0.0, 0.0], .. } => {}
                    _ => return Err(Error::config("analytic", "ex3 needs a cone support centred at the origin")),
                }
                self.check_centred_source()?;
            }
            None => {}
        }
        Ok(())
    }

    fn check_centred_source(&self) -> Result<()> {
        match self.source {
            SourceSpec::UniformDisk { center: [0.0, 0.0], .. } => Ok(()),
            _ => Err(Error::config("analytic", "needs a disk source centred at the origin")),
        }
    }

    /// Number of time steps.
    pub fn num_steps(&self) -> usize {
        (self.params.t_final / self.params.tau).round() as usize
    }

    /// Step indices (1-based) at which snapshots are taken, ascending and unique.
    pub fn snapshot_steps(&self) -> Vec<usize> {
        let mut steps: Vec<usize> = self.snapshots.iter().map(|t| (t / self.params.tau).round() as usize).collect();
        steps.push(self.num_steps());
        steps.sort_unstable();
        steps.dedup();
        steps
    }

    /// Canonical text form; parsing it gives back an equal config.
    pub fn to_canonical(&self) -> String {
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("name", self.name.clone());
        match self.domain {
            Domain::Disk { radius } => {
                kv("domain", "disk".into());
                kv("domain.radius", radius.to_string());
            }
            Domain::Square { bounds } => {
                kv("domain", "square".into());
                kv("domain.bounds", join(&bounds));
            }
        }
        match &self.mesh {
            MeshSource::Generated { h } => {
                kv("mesh", "generated".into());
                kv("mesh.h", h.to_string());
            }
            MeshSource::File(p) => {
                kv("mesh", "file".into());
                kv("mesh.path", p.display().to_string());
            }
        }
        match &self.support {
            SupportSpec::Flat => kv("support", "flat".into()),
            SupportSpec::Cone { center, height } => {
                kv("support", "cone".into());
                kv("support.center", join(center));
                kv("support.height", height.to_string());
            }
            SupportSpec::InvertedPyramid { margin } => {
                kv("support", "pyramid".into());
                kv("support.margin", margin.to_string());
            }
            SupportSpec::Expression(e) => {
                kv("support", "expression".into());
                kv("support.expr", e.clone());
            }
        }
        match self.source {
            SourceSpec::UniformDisk { center, radius, total_rate } => {
                kv("source", "disk".into());
                kv("source.center", join(&center));
                kv("source.radius", radius.to_string());
                kv("source.rate", total_rate.to_string());
            }
            SourceSpec::Constant { rate } => {
                kv("source", "constant".into());
                kv("source.rate", rate.to_string());
            }
        }
        let p = &self.params;
        kv("model.k0", p.k0.to_string());
        kv("model.eps", p.eps.to_string());
        kv("model.r", p.r.to_string());
        kv("model.delta", p.delta.to_string());
        kv("model.tau", p.tau.to_string());
        kv("model.t_final", p.t_final.to_string());
        match self.solver {
            SolverConfig::A { rho, stopping } => {
                kv("solver", "A".into());
                kv("solver.rho", rho.to_string());
                kv("solver.tol_w", stopping.tol_w.to_string());
                kv("solver.tol_phi", stopping.tol_phi.to_string());
                if let Some(g) = stopping.tol_gradient {
                    kv("solver.tol_gradient", g.to_string());
                }
                kv("solver.max_iters", stopping.max_iters.to_string());
            }
            SolverConfig::B { stopping, linear } => {
                kv("solver", "B".into());
                kv("solver.tol", stopping.tol.to_string());
                kv("solver.zero_floor", stopping.zero_floor.to_string());
                kv("solver.zero_min_iters", stopping.zero_min_iters.to_string());
                kv("solver.max_iters", stopping.max_iters.to_string());
                match linear.method {
                    SolveMethod::DirectCholesky => kv("solver.linear", "cholesky".into()),
                    SolveMethod::ConjugateGradient => {
                        kv("solver.linear", "cg".into());
                        kv("solver.cg_tol", linear.cg_rel_tol.to_string());
                        kv("solver.cg_max_iters", linear.cg_max_iter.to_string());
                    }
                }
            }
        }
        kv("output", self.output.name().into());
        if !self.snapshots.is_empty() {
            kv("output.snapshots", join(&self.snapshots));
        }
        kv("analytic", self.analytic.map_or("none", Benchmark::name).into());
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn take(&mut self, key: &str) -> Option<(String, usize)> {
        self.map.remove(key)
    }

    fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(v, _)| v)
    }

    fn required(&mut self, key: &str) -> Result<String> {
        self.string(key).ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        self.take(key).map(|(v, line)| parse_f64(key, &v, line)).transpose()
    }

    fn float_or(&mut self, key: &str, default: f64) -> Result<f64> {
        Ok(self.float(key)?.unwrap_or(default))
    }

    fn float_required(&mut self, key: &str) -> Result<f64> {
        self.float(key)?.ok_or_else(|| Error::config(key, "missing required key"))
    }

    fn usize_or(&mut self, key: &str, default: usize) -> Result<usize> {
        match self.take(key) {
            None => Ok(default),
            Some((v, line)) => {
                v.parse().map_err(|_| Error::config(key, format!("line {line}: `{v}` is not a non-negative integer")))
            }
        }
    }

    fn floats(&mut self, key: &str, n: Option<usize>) -> Result<Option<Vec<f64>>> {
        let Some((v, line)) = self.take(key) else { return Ok(None) };
        let vals = v
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|s| !s.is_empty())
            .map(|s| parse_f64(key, s, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(n) = n {
            if vals.len() != n {
                return Err(Error::config(key, format!("line {line}: expected {n} numbers, got {}", vals.len())));
            }
        }
        Ok(Some(vals))
    }

    fn point_or(&mut self, key: &str, default: [f64; 2]) -> Result<[f64; 2]> {
        Ok(self.floats(key, Some(2))?.map_or(default, |v| [v[0], v[1]]))
    }
}

fn parse_f64(key: &str, v: &str, line: usize) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::config(key, format!("line {line}: `{v}` is not a finite number"))),
    }
}

/// Parse a scenario. Relative mesh paths are resolved against `base_dir`.
pub fn parse_scenario_str(text: &str, default_name: &str, base_dir: &Path) -> Result<ScenarioConfig> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::config(line, format!("line {}: expected `key = value`", i + 1)));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if map.insert(k.clone(), (v, i + 1)).is_some() {
            return Err(Error::config(k, format!("line {}: duplicate key", i + 1)));
        }
    }
    let mut e = Entries { map };

    let name = e.string("name").unwrap_or_else(|| default_name.to_string());
    let domain = match e.required("domain")?.as_str() {
        "disk" => Domain::Disk { radius: e.float_or("domain.radius", 1.0)? },
        "square" => {
            let b = e.floats("domain.bounds", Some(4))?.unwrap_or_else(|| vec![-1.0, 1.0, -1.0, 1.0]);
            Domain::Square { bounds: [b[0], b[1], b[2], b[3]] }
        }
        other => return Err(Error::config("domain", format!("unknown domain `{other}` (disk | square)"))),
    };
    let mesh = match e.string("mesh").as_deref().unwrap_or("generated") {
        "generated" => MeshSource::Generated { h: e.float_required("mesh.h")? },
        "file" => {
            let p = PathBuf::from(e.required("mesh.path")?);
            MeshSource::File(if p.is_relative() { base_dir.join(p) } else { p })
        }
        other => return Err(Error::config("mesh", format!("unknown mesh source `{other}` (generated | file)"))),
    };
    let support = match e.string("support").as_deref().unwrap_or("flat") {
        "flat" => SupportSpec::Flat,
        "cone" => SupportSpec::Cone {
            center: e.point_or("support.center", [0.0, 0.0])?,
            height: e.float_required("support.height")?,
        },
        "pyramid" => SupportSpec::InvertedPyramid { margin: e.float_or("support.margin", 0.1)? },
        "expression" => SupportSpec::Expression(e.required("support.expr")?),
        other => {
            return Err(Error::config(
                "support",
                format!("unknown support `{other}` (flat | cone | pyramid | expression)"),
            ))
        }
    };
    let source = match e.required("source")?.as_str() {
        "disk" => SourceSpec::UniformDisk {
            center: e.point_or("source.center", [0.0, 0.0])?,
            radius: e.float_required("source.radius")?,
            total_rate: e.float_or("source.rate", 1.0)?,
        },
        "constant" => SourceSpec::Constant { rate: e.float_required("source.rate")? },
        other => return Err(Error::config("source", format!("unknown source `{other}` (disk | constant)"))),
    };
    let d = ModelParams::default();
    let params = ModelParams {
        k0: e.float_or("model.k0", d.k0)?,
        eps: e.float_or("model.eps", d.eps)?,
        r: e.float_or("model.r", d.r)?,
        delta: e.float_or("model.delta", d.delta)?,
        tau: e.float_required("model.tau")?,
        t_final: e.float_required("model.t_final")?,
    };
    let solver = match e.required("solver")?.as_str() {
        "A" | "a" => {
            let d = StoppingParamsA::default();
            let default_rho = if support == SupportSpec::Flat { 1.0 } else { 0.05 };
            SolverConfig::A {
                rho: e.float_or("solver.rho", default_rho)?,
                stopping: StoppingParamsA {
                    tol_w: e.float_or("solver.tol_w", d.tol_w)?,
                    tol_phi: e.float_or("solver.tol_phi", d.tol_phi)?,
                    tol_gradient: e.float("solver.tol_gradient")?,
                    max_iters: e.usize_or("solver.max_iters", d.max_iters)?,
                },
            }
        }
        "B" | "b" => {
            let d = StoppingParamsB::default();
            let stopping = StoppingParamsB {
                tol: e.float_or("solver.tol", d.tol)?,
                zero_floor: e.float_or("solver.zero_floor", d.zero_floor)?,
                zero_min_iters: e.usize_or("solver.zero_min_iters", d.zero_min_iters)?,
                max_iters: e.usize_or("solver.max_iters", d.max_iters)?,
            };
            let dl = SolveOptions::default();
            let linear = match e.string("solver.linear").as_deref().unwrap_or("cholesky") {
                "cholesky" => SolveOptions { method: SolveMethod::DirectCholesky, ..dl },
                "cg" => SolveOptions::cg(
                    e.float_or("solver.cg_tol", dl.cg_rel_tol)?,
                    e.usize_or("solver.cg_max_iters", dl.cg_max_iter)?,
                ),
                other => {
                    return Err(Error::config("solver.linear", format!("unknown solver `{other}` (cholesky | cg)")))
                }
            };
            SolverConfig::B { stopping, linear }
        }
        other => return Err(Error::config("solver", format!("unknown solver `{other}` (A | B)"))),
    };
    let output = match e.string("output").as_deref().unwrap_or("csv") {
        "csv" => OutputFormat::Csv,
        "vtk" => OutputFormat::Vtk,
        "both" => OutputFormat::Both,
        "none" => OutputFormat::None,
        other => return Err(Error::config("output", format!("unknown output `{other}` (csv | vtk | both | none)"))),
    };
    let snapshots = e.floats("output.snapshots", None)?.unwrap_or_default();
    let analytic = match e.string("analytic").as_deref().unwrap_or("none") {
        "none" => None,
        "ex1" => Some(Benchmark::FlatPile),
        "ex3" => Some(Benchmark::ConePile),
        other => return Err(Error::config("analytic", format!("unknown benchmark `{other}` (ex1 | ex3 | none)"))),
    };
    if let Some((key, (_, line))) = e.map.into_iter().next() {
        return Err(Error::config(key, format!("line {line}: unknown key")));
    }
    let cfg = ScenarioConfig { name, domain, mesh, support, source, params, solver, output, snapshots, analytic };
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_scenario(path: impl AsRef<Path>) -> Result<ScenarioConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("scenario");
    parse_scenario_str(&text, stem, path.parent().unwrap_or(Path::new(".")))
}
