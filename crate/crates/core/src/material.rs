//! Support surface, slope-bound operators and sources.
//!
//! The slope bound switches from the support's own slope `k1 = max(k0, |∇w0|)`
//! where the support is bare, to the friction slope `k0` once the sand layer
//! is at least `eps` thick, linearly in between.

use std::fmt;

use crate::error::{Error, Result};
use crate::fem::{norm, p0_project_nodal, p1_gradient, p1_integral, p1_interpolate, CellField, NodalField};
use crate::mesh::{Point, TriMesh};

/// Physical and regularization parameters shared by both schemes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    /// Critical slope of the sand (tangent of the angle of repose).
    pub k0: f64,
    /// Height band over which the slope bound relaxes from `k1` to `k0`.
    pub eps: f64,
    /// Flux regularization exponent, in (1, 2).
    pub r: f64,
    /// Smoothing of `|q|` in the flux iteration.
    pub delta: f64,
    pub t_final: f64,
    pub tau: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams { k0: 0.4, eps: 0.01, r: 1.0 + 1e-7, delta: 1e-9, t_final: 0.1, tau: 0.005 }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &str, msg: String| Err(Error::InvalidArgument(format!("{name}: {msg}")));
        if !(self.k0 > 0.0) {
            return bad("k0", format!("{} must be positive", self.k0));
        }
        if !(self.eps > 0.0) {
            return bad("eps", format!("{} must be positive", self.eps));
        }
        if !(self.r > 1.0 && self.r < 2.0) {
            return bad("r", format!("{} must lie in (1, 2)", self.r));
        }
        if !(self.delta > 0.0) {
            return bad("delta", format!("{} must be positive", self.delta));
        }
        if !(self.tau > 0.0) {
            return bad("tau", format!("{} must be positive", self.tau));
        }
        if !(self.t_final > 0.0) {
            return bad("t_final", format!("{} must be positive", self.t_final));
        }
        Ok(())
    }

    /// Number of uniform steps covering `[0, t_final]`.
    pub fn num_steps(&self) -> usize {
        (self.t_final / self.tau - 1e-9).ceil().max(1.0) as usize
    }
}

/// Shape of the rigid support surface `w0`.
#[derive(Debug, Clone, PartialEq)]
pub enum SupportSpec {
    Flat,
    /// `max(height − |x − center|, 0)`: a cone with unit slope.
    Cone {
        center: Point,
        height: f64,
    },
    /// `min(max(|x1|, |x2|) − (1 − margin), 0)` on (−1, 1)²: an inverted
    /// pyramid with unit-slope faces surrounded by a flat margin.
    InvertedPyramid {
        margin: f64,
    },
    /// Expression in `x` and `y`.
    Expression(String),
}

impl SupportSpec {
    /// Pointwise evaluator of `w0`.
    pub fn evaluator(&self) -> Result<Box<dyn Fn(Point) -> f64 + Send + Sync>> {
        Ok(match self.clone() {
            SupportSpec::Flat => Box::new(|_| 0.0),
            SupportSpec::Cone { center, height } => {
                Box::new(move |x| (height - (x[0] - center[0]).hypot(x[1] - center[1])).max(0.0))
            }
            SupportSpec::InvertedPyramid { margin } => {
                let a = 1.0 - margin;
                Box::new(move |x| ((x[0].abs() - a).max(x[1].abs() - a)).min(0.0))
            }
            SupportSpec::Expression(src) => {
                let expr: meval::Expr =
                    src.parse().map_err(|e| Error::InvalidArgument(format!("support expression `{src}`: {e}")))?;
                let eval = move |x: Point| {
                    expr.eval_with_context(((("x", x[0]), ("y", x[1])), meval::builtin())).unwrap_or(f64::NAN)
                };
                if !eval([0.0, 0.0]).is_finite() && !eval([0.1, 0.2]).is_finite() {
                    return Err(Error::InvalidArgument(format!(
                        "support expression `{src}` cannot be evaluated in terms of x and y"
                    )));
                }
                Box::new(eval)
            }
        })
    }
}

impl fmt::Display for SupportSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SupportSpec::Flat => write!(f, "flat"),
            SupportSpec::Cone { center, height } => write!(f, "cone({}, {}; {height})", center[0], center[1]),
            SupportSpec::InvertedPyramid { margin } => write!(f, "inverted-pyramid({margin})"),
            SupportSpec::Expression(s) => write!(f, "expression({s})"),
        }
    }
}

/// Discrete support: nodal interpolant, its cell means and the cell slope bound.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportData {
    pub w0_nodal: NodalField,
    pub w0h_cell: CellField,
    pub k1h_cell: CellField,
}

pub fn build_support(spec: &SupportSpec, mesh: &TriMesh, k0: f64) -> Result<SupportData> {
    let w0 = spec.evaluator()?;
    let w0_nodal = p1_interpolate(&*w0, mesh)?;
    for (v, &val) in w0_nodal.iter().enumerate() {
        if mesh.is_boundary_vertex(v) && val.abs() > 1e-12 {
            let p = mesh.vertices()[v];
            return Err(Error::Validation(format!(
                "support {spec} is {val:e} at boundary vertex {v} ({}, {}); it must vanish on the boundary",
                p[0], p[1]
            )));
        }
    }
    if matches!(spec, SupportSpec::Expression(_)) {
        log::warn!("support {spec}: the no-influx slope condition on the boundary is not checked");
    }
    let w0h_cell = p0_project_nodal(&w0_nodal, mesh)?;
    let k1h_cell = CellField(p1_gradient(&w0_nodal, mesh)?.iter().map(|g| norm(*g).max(k0)).collect());
    Ok(SupportData { w0_nodal, w0h_cell, k1h_cell })
}

/// Pointwise regularized slope bound.
///
/// `k0 + (k1 − k0)/eps · clamp(w0 + eps − eta, 0, eps)`: equal to `k1` when the
/// surface `eta` touches the support and to `k0` once it is `eps` above it.
#[inline]
pub fn m_eps_point(eta: f64, w0: f64, k1: f64, k0: f64, eps: f64) -> f64 {
    k0 + (k1 - k0) / eps * (w0 + eps - eta).max(0.0).min(eps)
}

/// Cellwise slope bound for a piecewise constant surface.
pub fn m_eps_h(etah: &CellField, support: &SupportData, params: &ModelParams) -> CellField {
    CellField(
        etah.iter()
            .zip(support.w0h_cell.iter())
            .zip(support.k1h_cell.iter())
            .map(|((&eta, &w0), &k1)| m_eps_point(eta, w0, k1, params.k0, params.eps))
            .collect(),
    )
}

/// Time-independent, nonnegative sources.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceSpec {
    /// Uniform density inside a disk, scaled to a given total rate.
    UniformDisk {
        center: Point,
        radius: f64,
        total_rate: f64,
    },
    Constant {
        rate: f64,
    },
}

impl SourceSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SourceSpec::UniformDisk { radius, total_rate, .. } => {
                if !(radius > 0.0) {
                    return Err(Error::InvalidArgument(format!("source radius {radius} must be positive")));
                }
                if !(total_rate >= 0.0) {
                    return Err(Error::InvalidArgument(format!("source rate {total_rate} must be nonnegative")));
                }
            }
            SourceSpec::Constant { rate } => {
                if !(rate >= 0.0) {
                    return Err(Error::InvalidArgument(format!("source rate {rate} must be nonnegative")));
                }
            }
        }
        Ok(())
    }

    fn inside(&self, x: Point) -> bool {
        match *self {
            SourceSpec::UniformDisk { center, radius, .. } => {
                (x[0] - center[0]).hypot(x[1] - center[1]) <= radius * (1.0 + 1e-12)
            }
            SourceSpec::Constant { .. } => true,
        }
    }
}

impl fmt::Display for SourceSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceSpec::UniformDisk { center, radius, total_rate } => {
                write!(f, "uniform-disk({}, {}; r={radius}, rate={total_rate})", center[0], center[1])
            }
            SourceSpec::Constant { rate } => write!(f, "constant({rate})"),
        }
    }
}

/// Piecewise constant source: disk membership by centroid, rescaled so the
/// discrete total equals the prescribed rate.
pub fn source_field_cells(spec: &SourceSpec, mesh: &TriMesh) -> Result<CellField> {
    spec.validate()?;
    match *spec {
        SourceSpec::Constant { rate } => Ok(CellField(vec![rate; mesh.num_triangles()])),
        SourceSpec::UniformDisk { total_rate, .. } => {
            let inside: Vec<bool> = (0..mesh.num_triangles()).map(|t| spec.inside(mesh.centroid(t))).collect();
            let covered: f64 = inside.iter().zip(mesh.areas()).filter(|(i, _)| **i).map(|(_, a)| a).sum();
            if covered == 0.0 {
                return Err(Error::Validation(format!("source {spec} covers no triangle of the mesh")));
            }
            let density = total_rate / covered;
            Ok(CellField(inside.iter().map(|&i| if i { density } else { 0.0 }).collect()))
        }
    }
}

/// Nodal source: disk membership by vertex, rescaled so the exact integral of
/// the P1 field equals the prescribed rate.
pub fn source_field_nodes(spec: &SourceSpec, mesh: &TriMesh) -> Result<NodalField> {
    spec.validate()?;
    match *spec {
        SourceSpec::Constant { rate } => Ok(NodalField(vec![rate; mesh.num_vertices()])),
        SourceSpec::UniformDisk { total_rate, .. } => {
            let indicator =
                NodalField(mesh.vertices().iter().map(|&p| if spec.inside(p) { 1.0 } else { 0.0 }).collect());
            let covered = p1_integral(&indicator, mesh);
            if covered == 0.0 {
                return Err(Error::Validation(format!("source {spec} contains no mesh vertex")));
            }
            let density = total_rate / covered;
            Ok(NodalField(indicator.iter().map(|i| i * density).collect()))
        }
    }
}
