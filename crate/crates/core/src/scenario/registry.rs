//! Built-in scenarios for the four benchmark experiments.

use std::path::Path;

use super::config::{parse_scenario_str, ScenarioConfig};

const EX1: &str = "
domain = disk
domain.radius = 1
support = flat
source = disk
source.radius = 0.2
source.rate = 1
model.k0 = 0.4
model.t_final = 0.1
analytic = ex1
";

const EX2: &str = "
domain = square
domain.bounds = -1 1 -1 1
mesh.h = 0.02
support = cone
support.center = 0.3 0
support.height = 0.5
source = disk
source.radius = 0.7
source.rate = 1
model.k0 = 0.4
model.eps = 0.01
";

const EX3: &str = "
domain = disk
domain.radius = 1
support = cone
support.height = 0.4
source = disk
source.radius = 0.2
source.rate = 1
model.k0 = 0.4
model.eps = 0.005
model.tau = 0.0005
model.t_final = 0.1
solver = B
analytic = ex3
";

const EX4: &str = "
domain = square
domain.bounds = -1 1 -1 1
mesh.h = 0.02
support = pyramid
support.margin = 0.1
source = constant
source.rate = 0.25
model.k0 = 0.4
model.eps = 0.02
model.tau = 0.0025
model.t_final = 0.075
solver = B
";

/// Names and one-line descriptions of the built-in scenarios.
pub const BUILTINS: &[(&str, &str)] = &[
    ("ex1-qa-h04", "flat support, continuous-surface scheme, h = 0.04, tau = 0.01"),
    ("ex1-qa-h02", "flat support, continuous-surface scheme, h = 0.02, tau = 0.01"),
    ("ex1-qb-h04", "flat support, flux scheme, h = 0.04, tau = 0.005, flux tolerance 1e-4"),
    ("ex1-qb-h02", "flat support, flux scheme, h = 0.02, tau = 0.005, flux tolerance 1e-4"),
    ("ex2-qa", "off-centre cone on a square, continuous-surface scheme, rho = 0.05, t = 0.1"),
    ("ex2-qb", "off-centre cone on a square, flux scheme, tau = 0.01, t = 0.2"),
    ("ex3-qb-h04", "pile around a cone, flux scheme, h = 0.04, 200 steps"),
    ("ex3-qb-h02", "pile around a cone, flux scheme, h = 0.02, 200 steps"),
    ("ex4-pyramid", "inverted pyramid with constant source, flux scheme, t = 0.075"),
];

fn text(name: &str) -> Option<String> {
    let s = match name {
        "ex1-qa-h04" => format!("{EX1}mesh.h = 0.04\nmodel.tau = 0.01\nsolver = A\nsolver.rho = 1\n"),
        "ex1-qa-h02" => format!("{EX1}mesh.h = 0.02\nmodel.tau = 0.01\nsolver = A\nsolver.rho = 1\n"),
        "ex1-qb-h04" => format!("{EX1}mesh.h = 0.04\nmodel.tau = 0.005\nsolver = B\nsolver.tol = 1e-4\n"),
        "ex1-qb-h02" => format!("{EX1}mesh.h = 0.02\nmodel.tau = 0.005\nsolver = B\nsolver.tol = 1e-4\n"),
        "ex2-qa" => format!("{EX2}model.tau = 0.005\nmodel.t_final = 0.1\nsolver = A\nsolver.rho = 0.05\n"),
        "ex2-qb" => format!("{EX2}model.tau = 0.01\nmodel.t_final = 0.2\nsolver = B\noutput.snapshots = 0.1 0.2\n"),
        "ex3-qb-h04" => format!("{EX3}mesh.h = 0.04\n"),
        "ex3-qb-h02" => format!("{EX3}mesh.h = 0.02\n"),
        "ex4-pyramid" => EX4.to_string(),
        _ => return None,
    };
    Some(format!("name = {name}\n{s}"))
}

/// A built-in scenario by name.
pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    let text = text(name)?;
    Some(parse_scenario_str(&text, name, Path::new(".")).expect("built-in scenarios are valid"))
}
