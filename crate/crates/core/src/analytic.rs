//! Radially symmetric reference solutions and relative L1 error measures.
//!
//! Both benchmarks pour a uniform source of total rate `rate` onto the disk
//! `|x| ≤ r0`. On a flat support the pile becomes a cone of slope `k0` once
//! `t ≥ t*`. On a conical support of unit slope and height `c` the sand slides
//! down the bare cone and collects in a ring `R1 ≤ |x| ≤ R2` whose surface has
//! slope `k0`. In both cases the flux follows from the radial balance
//! `(1/R) d(R q)/dR = f − ∂w/∂t` with `q(0) = 0`.

use crate::error::{Error, Result};
use crate::fem::{norm, CellField, CellVectorField, NodalField};
use crate::mesh::{Point, TriMesh};

/// Time after which the pile over a flat support is a full cone.
pub fn ex1_tstar(k0: f64, r0: f64, rate: f64) -> f64 {
    std::f64::consts::PI * k0 * r0.powi(3) * 3f64.sqrt() / rate
}

/// Pile over a flat support.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatPile {
    pub k0: f64,
    pub r0: f64,
    pub rate: f64,
}

impl Default for FlatPile {
    fn default() -> Self {
        FlatPile { k0: 0.4, r0: 0.2, rate: 1.0 }
    }
}

impl FlatPile {
    /// Base radius of the cone holding volume `rate · t`.
    pub fn base_radius(&self, t: f64) -> f64 {
        (3.0 * self.rate * t / (std::f64::consts::PI * self.k0)).cbrt()
    }

    pub fn at(&self, t: f64) -> Result<RadialSolution> {
        let tstar = ex1_tstar(self.k0, self.r0, self.rate);
        if !(t >= tstar * (1.0 - 1e-12)) {
            return Err(Error::OutOfRegime(format!("t = {t} precedes the conical regime (t* = {tstar:.6})")));
        }
        let rc = self.base_radius(t);
        Ok(RadialSolution {
            t,
            k0: self.k0,
            r0: self.r0,
            rate: self.rate,
            support_height: 0.0,
            inner_radius: 0.0,
            outer_radius: rc,
            outer_speed: self.rate / (std::f64::consts::PI * self.k0 * rc * rc),
        })
    }
}

/// Pile collecting around a conical support of unit slope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConePile {
    pub k0: f64,
    pub r0: f64,
    pub rate: f64,
    /// Height (and base radius) of the support cone.
    pub cone: f64,
}

impl Default for ConePile {
    fn default() -> Self {
        ConePile { k0: 0.4, r0: 0.2, rate: 1.0, cone: 0.4 }
    }
}

impl ConePile {
    /// Outer radius of the ring whose inner edge meets the support at `r1`.
    fn outer(&self, r1: f64) -> f64 {
        r1 + (self.cone - r1) / self.k0
    }

    fn volume(&self, r1: f64) -> f64 {
        let r2 = self.outer(r1);
        std::f64::consts::PI / 3.0 * ((r2.powi(3) - r1.powi(3)) * self.k0 - (self.cone.powi(3) - r1.powi(3)))
    }

    /// Inner and outer radius of the ring at time `t`, by bisection.
    pub fn radii(&self, t: f64) -> Result<(f64, f64)> {
        if !(self.k0 > 0.0 && self.k0 < 1.0) {
            return Err(Error::OutOfRegime(format!("k0 = {} must lie below the support slope 1", self.k0)));
        }
        let target = self.rate * t;
        if !(target > 0.0) || target > self.volume(0.0) {
            return Err(Error::OutOfRegime(format!(
                "t = {t}: no ring radius in [0, {}] holds volume {target}",
                self.cone
            )));
        }
        // the held volume decreases as the ring's inner edge climbs the cone
        let (mut lo, mut hi) = (0.0, self.cone);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if self.volume(mid) > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let r1 = 0.5 * (lo + hi);
        Ok((r1, self.outer(r1)))
    }

    pub fn at(&self, t: f64) -> Result<RadialSolution> {
        let (r1, r2) = self.radii(t)?;
        let dt = 1e-6;
        let speed = if t > dt {
            (self.radii(t + dt)?.1 - self.radii(t - dt)?.1) / (2.0 * dt)
        } else {
            (self.radii(t + dt)?.1 - r2) / dt
        };
        Ok(RadialSolution {
            t,
            k0: self.k0,
            r0: self.r0,
            rate: self.rate,
            support_height: self.cone,
            inner_radius: r1,
            outer_radius: r2,
            outer_speed: speed,
        })
    }
}

/// Snapshot of a radial solution: a pile of slope `k0` on `[inner, outer]`
/// whose outer edge advances at `outer_speed`, resting on the support inside.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialSolution {
    pub t: f64,
    pub k0: f64,
    pub r0: f64,
    pub rate: f64,
    /// Height of the unit-slope support cone; 0 for a flat support.
    pub support_height: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub outer_speed: f64,
}

impl RadialSolution {
    pub fn pile_base_radius(&self) -> f64 {
        self.outer_radius
    }

    pub fn surface(&self, r: f64) -> f64 {
        if r < self.inner_radius {
            (self.support_height - r).max(0.0)
        } else {
            self.k0 * (self.outer_radius - r).max(0.0)
        }
    }

    /// `∫_0^R f s ds`.
    fn source_moment(&self, r: f64) -> f64 {
        let a = r.min(self.r0);
        self.rate / (std::f64::consts::PI * self.r0 * self.r0) * a * a / 2.0
    }

    /// Outward radial flux magnitude.
    pub fn flux(&self, r: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        let (r1, r2) = (self.inner_radius, self.outer_radius);
        if r >= r2 {
            return 0.0;
        }
        let c = r.clamp(r1, r2);
        (self.source_moment(r) - self.k0 * self.outer_speed * (c * c - r1 * r1) / 2.0) / r
    }

    pub fn surface_at(&self, x: Point) -> f64 {
        self.surface(x[0].hypot(x[1]))
    }

    pub fn flux_at(&self, x: Point) -> [f64; 2] {
        let r = x[0].hypot(x[1]);
        if r == 0.0 {
            return [0.0, 0.0];
        }
        let q = self.flux(r);
        [q * x[0] / r, q * x[1] / r]
    }
}

fn ratio(num: f64, den: f64) -> Result<f64> {
    if den > 0.0 {
        Ok(num / den)
    } else {
        Err(Error::UndefinedError)
    }
}

/// Relative L1 error of a P1 surface, by vertex quadrature.
pub fn rel_l1_error_nodal(num: &NodalField, exact: impl Fn(Point) -> f64, mesh: &TriMesh) -> Result<f64> {
    crate::fem::check_len(mesh.num_vertices(), num.len())?;
    let (mut diff, mut size) = (0.0, 0.0);
    for ((m, &p), v) in mesh.lumped_mass().iter().zip(mesh.vertices()).zip(num.iter()) {
        let e = exact(p);
        diff += m * (v - e).abs();
        size += m * e.abs();
    }
    ratio(diff, size)
}

/// Relative L1 error of a piecewise constant surface, by the centroid rule.
pub fn rel_l1_error_cells(num: &CellField, exact: impl Fn(Point) -> f64, mesh: &TriMesh) -> Result<f64> {
    crate::fem::check_len(mesh.num_triangles(), num.len())?;
    let (mut diff, mut size) = (0.0, 0.0);
    for (t, v) in num.iter().enumerate() {
        let e = exact(mesh.centroid(t));
        diff += mesh.area(t) * (v - e).abs();
        size += mesh.area(t) * e.abs();
    }
    ratio(diff, size)
}

/// Relative L1 error of a flux sampled at centroids.
pub fn rel_l1_error_flux(num: &CellVectorField, exact: impl Fn(Point) -> [f64; 2], mesh: &TriMesh) -> Result<f64> {
    crate::fem::check_len(mesh.num_triangles(), num.len())?;
    let (mut diff, mut size) = (0.0, 0.0);
    for (t, v) in num.iter().enumerate() {
        let e = exact(mesh.centroid(t));
        diff += mesh.area(t) * norm([v[0] - e[0], v[1] - e[1]]);
        size += mesh.area(t) * norm(e);
    }
    ratio(diff, size)
}
