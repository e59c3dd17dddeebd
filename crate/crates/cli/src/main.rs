//! qsatlab command-line driver: one subcommand per library operation,
//! machine-readable output to --out, human summary on stdout.
//!
//! Exit codes: 0 success; 1 validation or user error; 2 measure-zero
//! numerical degeneracy (degenerate loop, singular transfer), so sweep
//! drivers can re-draw instead of aborting.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use qsatlab::bounds::{alpha_weak_bound, unsat_certificate_k2};
use qsatlab::ensemble::{
    census, figure_eight_energy_scaling, geometrization_trial, sat_crossing, scan,
    write_scan_csv, SweepOptions,
};
use qsatlab::error::Error;
use qsatlab::hypergraph::{graph_stats, sample_hypergraph, thresholds, Hypergraph, SampleMode};
use qsatlab::instance::{build_instance, QsatInstance};
use qsatlab::solver::{
    check_weak_bound, ground_state_energy, kernel_dimension, verify_product_state, SolverOptions,
};
use qsatlab::transfer::lift_product_state;

#[derive(Parser)]
#[command(name = "qsatlab", version, about = "Random k-QSAT laboratory")]
struct Cli {
    /// Worker threads (default: available parallelism; env QSATLAB_THREADS
    /// is the fallback when the flag is absent). Output bytes do not depend
    /// on this.
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random instance (hypergraph + Haar frames) to a file.
    Gen(GenArgs),
    /// Generate or analyze a hypergraph.
    Graph(GraphArgs),
    /// Exact kernel dimension of an instance file.
    Solve(SolveArgs),
    /// Construct a zero-energy product state by leaf-order lifting.
    ProductState(ProductStateArgs),
    /// Sweep the clause-density grid, emitting CSV rows.
    Scan(ScanArgs),
    /// Re-draw projectors on a fixed graph and histogram the kernel dimension.
    Geometrize(GeometrizeArgs),
    /// Monte Carlo figure-eight census vs the expected-count formula.
    Census(CensusArgs),
    /// Threshold table for (k, r).
    Bounds(BoundsArgs),
    /// Iterative ground-state energy of an instance file.
    Energy(EnergyArgs),
    /// Figure-eight ground-state energy scaling in the loop size.
    EightScaling(EightScalingArgs),
    /// Classical UNSAT certificate for a k=2 graph.
    Certificate(CertificateArgs),
}

#[derive(Args, Serialize)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Edge-count convention: poisson | fixed-m
    #[arg(long, default_value = "poisson")]
    mode: String,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Serialize)]
struct GraphArgs {
    /// Analyze an existing graph file instead of sampling.
    #[arg(long, conflicts_with_all = ["n", "k", "alpha", "seed"])]
    r#in: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "poisson")]
    mode: String,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct SolveArgs {
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long, default_value_t = 100.0)]
    tol_factor: f64,
    #[arg(long, default_value_t = 16)]
    cap: usize,
    /// Include the orthonormal kernel basis in the report.
    #[arg(long)]
    with_basis: bool,
    /// Also check the weak bound on the trajectory.
    #[arg(long)]
    check_bound: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ProductStateArgs {
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ScanArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long)]
    n: usize,
    /// Grid as min:max:step (inclusive), a comma list, or one value.
    #[arg(long)]
    alpha: String,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 16)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct GeometrizeArgs {
    /// Graph file to re-draw projectors on.
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long, default_value_t = 1)]
    r: usize,
    #[arg(long, default_value_t = 50)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CensusArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    alpha: f64,
    #[arg(long, default_value_t = 6)]
    loop_len: usize,
    #[arg(long, default_value_t = 2)]
    chord_dist: usize,
    #[arg(long)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct BoundsArgs {
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 1)]
    r: usize,
    /// Optional CSV output path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EnergyArgs {
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long, default_value_t = 1e-10)]
    tol: f64,
    #[arg(long, default_value_t = 20000)]
    max_iter: usize,
    #[arg(long, default_value_t = 20)]
    cap: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct EightScalingArgs {
    /// Comma-separated loop sizes, e.g. 4,6,8.
    #[arg(long, default_value = "4,6,8")]
    loops: String,
    #[arg(long, default_value_t = 100)]
    trials: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct CertificateArgs {
    #[arg(long)]
    r#in: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let threads = cli.threads.or_else(|| {
        std::env::var("QSATLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(t) = threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: could not configure {t} threads: {e}");
            return ExitCode::from(1);
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_degeneracy() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

/// Resolve an optional seed, drawing from OS entropy when absent; the drawn
/// value is recorded in the output config either way.
fn resolve_seed(seed: Option<u64>) -> u64 {
    seed.unwrap_or_else(|| {
        use rand::RngCore;
        rand::rng().next_u64()
    })
}

fn config_json<T: Serialize>(command: &str, args: &T, seed: u64) -> serde_json::Value {
    let mut v = serde_json::to_value(args).expect("args serialize");
    v["command"] = serde_json::Value::String(command.into());
    v["seed"] = serde_json::Value::from(seed);
    v
}

fn write_json_output(
    out: Option<&PathBuf>,
    config: &serde_json::Value,
    result: serde_json::Value,
) -> Result<(), Error> {
    let doc = serde_json::json!({ "config": config, "result": result });
    let text = serde_json::to_string_pretty(&doc)
        .map_err(|e| Error::Parse { message: e.to_string(), location: None })?;
    match out {
        Some(path) => {
            let mut f = std::fs::File::create(path)?;
            f.write_all(text.as_bytes())?;
            f.write_all(b"\n")?;
        }
        None => {}
    }
    Ok(())
}

fn parse_mode(s: &str) -> Result<SampleMode, Error> {
    match s {
        "poisson" => Ok(SampleMode::Poisson),
        "fixed-m" | "fixed_m" => Ok(SampleMode::FixedM),
        other => Err(Error::InvalidArgument(format!(
            "mode '{other}' (expected poisson or fixed-m)"
        ))),
    }
}

/// min:max:step (inclusive within half a step), a comma list, or one value.
fn parse_grid(s: &str) -> Result<Vec<f64>, Error> {
    let bad = |m: &str| Error::InvalidArgument(format!("alpha grid '{s}': {m}"));
    if s.contains(':') {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(bad("expected min:max:step"));
        }
        let min: f64 = parts[0].parse().map_err(|_| bad("bad min"))?;
        let max: f64 = parts[1].parse().map_err(|_| bad("bad max"))?;
        let step: f64 = parts[2].parse().map_err(|_| bad("bad step"))?;
        if step <= 0.0 || max < min {
            return Err(bad("need step > 0 and max >= min"));
        }
        let mut grid = Vec::new();
        let mut i = 0usize;
        loop {
            let v = min + i as f64 * step;
            if v > max + step / 2.0 {
                break;
            }
            grid.push(v);
            i += 1;
        }
        Ok(grid)
    } else if s.contains(',') {
        s.split(',')
            .map(|t| t.trim().parse::<f64>().map_err(|_| bad("bad value")))
            .collect()
    } else {
        Ok(vec![s.parse().map_err(|_| bad("bad value"))?])
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::Gen(args) => {
            let seed = resolve_seed(args.seed);
            let mode = parse_mode(&args.mode)?;
            let g = sample_hypergraph(args.n, args.k, args.alpha, mode, seed)?;
            let inst = build_instance(&g, args.r, seed)?;
            inst.save(&args.out)?;
            println!(
                "instance: n={} k={} r={} M={} seed={} -> {}",
                args.n,
                args.k,
                args.r,
                inst.m(),
                seed,
                args.out.display()
            );
            Ok(())
        }
        Command::Graph(args) => {
            let seed = resolve_seed(args.seed);
            let g = match &args.r#in {
                Some(path) => Hypergraph::load(path)?,
                None => {
                    let (n, k, alpha) = match (args.n, args.k, args.alpha) {
                        (Some(n), Some(k), Some(a)) => (n, k, a),
                        _ => {
                            return Err(Error::InvalidArgument(
                                "need --in or all of --n --k --alpha".into(),
                            ))
                        }
                    };
                    sample_hypergraph(n, k, alpha, parse_mode(&args.mode)?, seed)?
                }
            };
            let stats = graph_stats(&g);
            println!(
                "graph: n={} k={} M={} components={} giant={:.4} core: {} qubits / {} edges",
                g.n,
                g.k,
                g.m(),
                stats.component_count,
                stats.giant_fraction,
                stats.hypercore_qubits,
                stats.hypercore_edges
            );
            if let Some(ex) = &stats.excesses {
                let worst = ex.iter().max().unwrap_or(&0);
                println!("max component excess: {worst}");
            }
            if let Some(out) = &args.out {
                if args.r#in.is_none() {
                    g.save(out)?;
                    println!("wrote {}", out.display());
                } else {
                    let config = config_json("graph", &args, seed);
                    write_json_output(
                        Some(out),
                        &config,
                        serde_json::to_value(&stats).unwrap(),
                    )?;
                    println!("wrote {}", out.display());
                }
            }
            Ok(())
        }
        Command::Solve(args) => {
            let inst = QsatInstance::load(&args.r#in)?;
            let opts = SolverOptions {
                qubit_cap: args.cap,
                tol_factor: args.tol_factor,
                with_basis: args.with_basis,
                ..SolverOptions::default()
            };
            let rep = kernel_dimension(&inst, &opts)?;
            println!(
                "D = {} ({}), margin = {}, flagged steps: {}",
                rep.dim,
                if rep.is_sat() { "SAT" } else { "UNSAT" },
                rep.margin.map(|m| format!("{m:.3e}")).unwrap_or_else(|| "none".into()),
                rep.flagged_steps.len()
            );
            let mut result = serde_json::to_value(&rep)
                .map_err(|e| Error::Parse { message: e.to_string(), location: None })?;
            if args.check_bound {
                let check = check_weak_bound(&rep, inst.n(), inst.k(), inst.r);
                println!(
                    "weak bound: {} (log2 D = {:.4}, bound = {:.4})",
                    if check.pass() { "pass" } else { "VIOLATED" },
                    check.final_log2_dim,
                    check.final_log2_bound
                );
                result["weak_bound"] = serde_json::to_value(&check).unwrap();
            }
            let config = config_json("solve", &args, inst.seed);
            write_json_output(args.out.as_ref(), &config, result)?;
            Ok(())
        }
        Command::ProductState(args) => {
            let inst = QsatInstance::load(&args.r#in)?;
            let ps = lift_product_state(&inst, None)?;
            let residual = verify_product_state(&inst, &ps)?;
            println!("product state residual: {residual:.3e}");
            if let Some(out) = &args.out {
                ps.save(out)?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Scan(args) => {
            let seed = resolve_seed(args.seed);
            let grid = parse_grid(&args.alpha)?;
            let opts = SweepOptions {
                solver: SolverOptions {
                    qubit_cap: args.cap,
                    ..SolverOptions::default()
                },
                ..SweepOptions::default()
            };
            let rows = scan(args.k, args.r, &grid, args.n, args.trials, seed, &opts)?;
            let config = config_json("scan", &args, seed);
            let comment = format!("config: {config}");
            match &args.out {
                Some(path) => {
                    let f = std::fs::File::create(path)?;
                    write_scan_csv(&rows, Some(&comment), std::io::BufWriter::new(f))?;
                    println!("wrote {} rows to {}", rows.len(), path.display());
                }
                None => {
                    write_scan_csv(&rows, Some(&comment), std::io::stdout().lock())?;
                }
            }
            if args.k == 2 {
                let points: Vec<(f64, u64, u64)> = rows
                    .iter()
                    .filter_map(|r| {
                        r.p_sat.map(|p| {
                            (
                                r.alpha,
                                (p * r.trials as f64).round() as u64,
                                r.trials as u64,
                            )
                        })
                    })
                    .collect();
                if let Some(c) = sat_crossing(&points, 200, seed ^ 0xB007) {
                    println!(
                        "P[SAT] crosses 1/2 at alpha = {:.4} +- {:.4}",
                        c.alpha_star, c.std_err
                    );
                }
            }
            Ok(())
        }
        Command::Geometrize(args) => {
            let seed = resolve_seed(args.seed);
            let g = Hypergraph::load(&args.r#in)?;
            let rep = geometrization_trial(&g, args.r, args.trials, seed, &SweepOptions::default())?;
            println!(
                "modal D = {} in {}/{} trials; min margin = {}",
                rep.modal_d,
                rep.modal_count,
                rep.trials,
                rep.min_margin
                    .map(|m| format!("{m:.3e}"))
                    .unwrap_or_else(|| "none".into())
            );
            let config = config_json("geometrize", &args, seed);
            write_json_output(
                args.out.as_ref(),
                &config,
                serde_json::to_value(&rep).unwrap(),
            )?;
            Ok(())
        }
        Command::Census(args) => {
            let seed = resolve_seed(args.seed);
            let row = census(
                args.n,
                args.alpha,
                args.loop_len,
                args.chord_dist,
                args.trials,
                seed,
            )?;
            println!(
                "observed mean = {:.4}, predicted = {:.4}, z = {:.3}",
                row.observed_mean, row.predicted, row.z_score
            );
            let config = config_json("census", &args, seed);
            write_json_output(
                args.out.as_ref(),
                &config,
                serde_json::to_value(&row).unwrap(),
            )?;
            Ok(())
        }
        Command::Bounds(args) => {
            let t = thresholds(args.k)?;
            let wb = alpha_weak_bound(args.k, args.r)?;
            let hc = t
                .alpha_hc
                .map(|v| format!("{v:.4}"))
                .unwrap_or_else(|| "unknown".into());
            println!("thresholds for k={} r={}", args.k, args.r);
            println!("  alpha_gc  {:.4}", t.alpha_gc);
            println!("  alpha_hc  {hc}");
            println!("  alpha_wb  {wb:.4}");
            if let Some(out) = &args.out {
                let mut f = std::fs::File::create(out)?;
                let config = config_json("bounds", &args, 0);
                writeln!(f, "# config: {config}")?;
                writeln!(f, "k,r,alpha_gc,alpha_hc,alpha_wb")?;
                writeln!(
                    f,
                    "{},{},{},{},{}",
                    args.k,
                    args.r,
                    t.alpha_gc,
                    t.alpha_hc.map(|v| v.to_string()).unwrap_or_default(),
                    wb
                )?;
                println!("wrote {}", out.display());
            }
            Ok(())
        }
        Command::Energy(args) => {
            let inst = QsatInstance::load(&args.r#in)?;
            let rep = qsatlab::solver::ground_state_energy_capped(
                &inst,
                args.tol,
                args.max_iter,
                args.cap,
            )?;
            println!(
                "E0 = {:.6e} (residual {:.3e}, {} iterations, converged: {})",
                rep.e0, rep.residual, rep.iterations, rep.converged
            );
            let config = config_json("energy", &args, inst.seed);
            write_json_output(
                args.out.as_ref(),
                &config,
                serde_json::to_value(&rep).unwrap(),
            )?;
            Ok(())
        }
        Command::EightScaling(args) => {
            let seed = resolve_seed(args.seed);
            let loops: Vec<usize> = args
                .loops
                .split(',')
                .map(|t| {
                    t.trim()
                        .parse()
                        .map_err(|_| Error::InvalidArgument(format!("bad loop size '{t}'")))
                })
                .collect::<Result<_, _>>()?;
            let rep =
                figure_eight_energy_scaling(&loops, args.trials, seed, &SweepOptions::default())?;
            for row in &rep.rows {
                println!(
                    "L = {:2}: mean E0 = {:.6e} (min {:.3e}, {} converged / {} trials)",
                    row.loop_len, row.mean_e0, row.min_e0, row.converged, row.trials
                );
            }
            println!(
                "log-log slope = {:.3} (95% CI [{:.3}, {:.3}]), R^2 = {:.4}",
                rep.slope, rep.slope_ci.0, rep.slope_ci.1, rep.r_squared
            );
            let config = config_json("eight-scaling", &args, seed);
            write_json_output(
                args.out.as_ref(),
                &config,
                serde_json::to_value(&rep).unwrap(),
            )?;
            Ok(())
        }
        Command::Certificate(args) => {
            let g = Hypergraph::load(&args.r#in)?;
            let cert = unsat_certificate_k2(&g)?;
            println!(
                "certificate ({:?}) on {} qubits, verified: {:?}",
                cert.kind,
                cert.component_qubits.len(),
                cert.verified
            );
            let config = config_json("certificate", &args, g.seed);
            write_json_output(
                args.out.as_ref(),
                &config,
                serde_json::to_value(&cert).unwrap(),
            )?;
            Ok(())
        }
    }
}
