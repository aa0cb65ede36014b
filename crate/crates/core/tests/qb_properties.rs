use std::path::Path;

use sandpile::scenario::{parse_scenario_str, run_scenario, FinalFields, ScenarioConfig};

fn ex1(h: f64, t_final: f64, extra: &str) -> ScenarioConfig {
    let text = format!(
        "domain = disk\ndomain.radius = 1\nmesh.h = {h}\nsupport = flat\nsource = disk\nsource.radius = 0.2\n\
         source.rate = 1\nmodel.tau = 0.005\nmodel.t_final = {t_final}\nsolver = B\nsolver.tol = 1e-4\n\
         analytic = ex1\noutput = none\n{extra}"
    );
    parse_scenario_str(&text, "ex1-test", Path::new(".")).unwrap()
}

#[test]
fn coarse_flat_pile_balances_and_flows_outward() {
    let out = run_scenario(&ex1(0.08, 0.1, ""), None).unwrap();
    let report = &out.report;
    assert_eq!(report.steps.len(), 20);
    for s in &report.steps {
        assert!(s.balance.unwrap() <= 1e-13, "step {}: {:e}", s.step, s.balance.unwrap());
    }
    assert!(report.monitors.violations().is_empty(), "{:?}", report.monitors);

    let last = report.last().unwrap();
    assert!((last.volume - 0.1).abs() < 1e-3, "{}", last.volume);
    assert!(last.surface_error.unwrap() < 0.03);

    let q = out.fields.cell_flux();
    let qmax = q.iter().map(|v| v[0].hypot(v[1])).fold(0.0, f64::max);
    assert!(qmax > 0.1);
    for (t, v) in q.iter().enumerate() {
        if v[0].hypot(v[1]) > 1e-3 * qmax {
            let c = out.mesh.centroid(t);
            assert!(v[0] * c[0] + v[1] * c[1] > 0.0, "cell {t} at {c:?}: {v:?}");
        }
    }
}

#[test]
fn conjugate_gradient_matches_direct_solve() {
    let direct = run_scenario(&ex1(0.1, 0.03, ""), None).unwrap();
    let cg = run_scenario(&ex1(0.1, 0.03, "solver.linear = cg\nsolver.cg_tol = 1e-13\n"), None).unwrap();
    let (FinalFields::B { w: a, .. }, FinalFields::B { w: b, .. }) = (&direct.fields, &cg.fields) else {
        panic!("flux scheme expected");
    };
    let diff = a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-6, "{diff:e}");
}

#[test]
fn no_source_leaves_the_support_at_rest() {
    let text = "domain = square\ndomain.bounds = -1 1 -1 1\nmesh.h = 0.2\nsupport = cone\nsupport.center = 0 0\n\
                support.height = 0.5\nsource = constant\nsource.rate = 0\nmodel.tau = 0.01\n\
                model.t_final = 0.01\nsolver = B\noutput = none\n";
    let cfg = parse_scenario_str(text, "rest", Path::new(".")).unwrap();
    let out = run_scenario(&cfg, None).unwrap();
    let FinalFields::B { w, q, .. } = &out.fields else { panic!("flux scheme expected") };
    // the bare cone stays put up to the scale of the flux regularization
    for (a, b) in w.iter().zip(out.support.w0h_cell.iter()) {
        assert!((a - b).abs() < 1e-9);
    }
    assert!(q.iter().all(|v| v.abs() < 1e-8));
}
