use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand, ValueEnum};
use sandpile::analytic::{ConePile, FlatPile};
use sandpile::export::write_csv_to;
use sandpile::mesh::build_edge_topology;
use sandpile::scenario::{
    build_mesh, builtin, parse_scenario, run_scenario, OutputFormat, RunOutcome, ScenarioConfig, BUILTINS,
};
use sandpile::Error;

#[derive(Parser)]
#[command(name = "sandpile", version, about = "Growing sandpile simulations with mixed finite elements")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one or more scenarios (files or built-in names) and write outputs.
    Run {
        #[arg(required = true)]
        configs: Vec<String>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker threads when several scenarios are given.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Sample a reference solution: prints `R,w,q` as CSV.
    Analytic(AnalyticArgs),
    /// Run a scenario without writing files and print its errors.
    Compare { config: String },
    /// Print mesh statistics of a scenario.
    MeshInfo { config: String },
    /// List the built-in scenarios.
    List,
}

#[derive(Args)]
struct AnalyticArgs {
    #[arg(value_enum)]
    benchmark: BenchmarkArg,
    #[arg(long)]
    t: f64,
    #[arg(long, default_value_t = 101)]
    samples: usize,
    /// Largest radius sampled.
    #[arg(long, default_value_t = 1.0)]
    rmax: f64,
    #[arg(long, default_value_t = 0.4)]
    k0: f64,
    /// Radius of the source disk.
    #[arg(long, default_value_t = 0.2)]
    r0: f64,
    /// Total source rate.
    #[arg(long, default_value_t = 1.0)]
    rate: f64,
    /// Height of the support cone (ex3 only).
    #[arg(long, default_value_t = 0.4)]
    cone: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum BenchmarkArg {
    Ex1,
    Ex3,
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config { .. }
        | Error::Format { .. }
        | Error::Validation(_)
        | Error::InvalidArgument(_)
        | Error::OutOfRegime(_) => 2,
        Error::NonConvergence { .. } | Error::LinearConvergence { .. } => 3,
        Error::Io(_) => 4,
        _ => 1,
    }
}

/// A scenario file, or a built-in name when no such file exists.
fn load(arg: &str) -> Result<ScenarioConfig, Error> {
    let path = Path::new(arg);
    if path.exists() {
        return parse_scenario(path);
    }
    builtin(arg).ok_or_else(|| {
        std::io::Error::new(std::io::ErrorKind::NotFound, format!("{arg}: no such file or built-in scenario")).into()
    })
}

fn pct(x: Option<f64>) -> String {
    x.map(|v| format!("{:.3}%", 100.0 * v)).unwrap_or_else(|| "n/a".into())
}

fn summary(out: &RunOutcome) -> String {
    let r = &out.report;
    let iterations: usize = r.steps.iter().map(|s| s.iterations).sum();
    let mut s = format!(
        "{} (solver {}): {} triangles, {} steps, {} iterations, {:.1} s\n",
        r.scenario,
        r.solver,
        out.mesh.num_triangles(),
        r.steps.len(),
        iterations,
        r.wall_seconds
    );
    for snap in &r.snapshots {
        let c = out.mesh.centroid(snap.max_flux_cell);
        s += &format!(
            "  t = {:.6}: surface error {}, flux error {}, volume {:.6}, sand volume {:.6}, max |Q| {:.4} at ({:.3}, {:.3})\n",
            snap.t,
            pct(snap.surface_error),
            pct(snap.flux_error),
            snap.volume,
            snap.sand_volume,
            snap.max_flux,
            c[0],
            c[1]
        );
    }
    let v = r.monitors.violations();
    if v.is_empty() {
        s += "  monitors: ok\n";
    } else {
        s += &format!("  monitors: {}\n", v.join("; "));
    }
    s
}

fn run_many(configs: &[String], out: &Path, jobs: usize) -> u8 {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<String, Error>>>> = Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(arg) = configs.get(i) else { break };
                let res = load(arg).and_then(|cfg| {
                    log::info!("running {}", cfg.name);
                    run_scenario(&cfg, Some(out)).map(|o| summary(&o))
                });
                results.lock().unwrap()[i] = Some(res);
            });
        }
    });
    let mut code = 0;
    for (arg, res) in configs.iter().zip(results.into_inner().unwrap()) {
        match res.expect("every scenario ran") {
            Ok(s) => print!("{s}"),
            Err(e) => {
                eprintln!("{arg}: {e}");
                if code == 0 {
                    code = exit_code(&e);
                }
            }
        }
    }
    code
}

fn analytic(a: &AnalyticArgs) -> Result<(), Error> {
    let AnalyticArgs { t, samples, rmax, k0, r0, rate, cone, .. } = *a;
    if samples < 2 || rmax.is_nan() || rmax <= 0.0 {
        return Err(Error::InvalidArgument("need at least 2 samples and a positive --rmax".into()));
    }
    let sol = match a.benchmark {
        BenchmarkArg::Ex1 => FlatPile { k0, r0, rate }.at(t)?,
        BenchmarkArg::Ex3 => ConePile { k0, r0, rate, cone }.at(t)?,
    };
    let rows: Vec<Vec<Option<f64>>> = (0..samples)
        .map(|i| {
            let r = rmax * i as f64 / (samples - 1) as f64;
            vec![Some(r), Some(sol.surface(r)), Some(sol.flux(r))]
        })
        .collect();
    let mut stdout = std::io::stdout().lock();
    write_csv_to(&mut stdout, &["R", "w", "q"], &rows)
}

fn mesh_info(arg: &str) -> Result<(), Error> {
    let cfg = load(arg)?;
    let mesh = build_mesh(&cfg)?;
    let topo = build_edge_topology(&mesh)?;
    let q = mesh.quality();
    println!("scenario     {}", cfg.name);
    println!("vertices     {}", mesh.num_vertices());
    println!("interior     {}", mesh.num_interior_vertices());
    println!("triangles    {}", mesh.num_triangles());
    println!("edges        {}", topo.num_edges());
    println!("area         {:.6}", mesh.total_area());
    println!("h_max        {:.6}", q.h_max);
    println!("h_min        {:.6}", q.h_min);
    println!("regularity   {:.4}", q.regularity);
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { configs, out, jobs } => {
            let jobs = jobs.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            return ExitCode::from(run_many(&configs, &out, jobs));
        }
        Command::Analytic(args) => analytic(&args),
        Command::Compare { config } => load(&config).and_then(|mut cfg| {
            cfg.output = OutputFormat::None;
            let out = run_scenario(&cfg, None)?;
            print!("{}", summary(&out));
            Ok(())
        }),
        Command::MeshInfo { config } => mesh_info(&config),
        Command::List => {
            for (name, about) in BUILTINS {
                println!("{name:<14} {about}");
            }
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
