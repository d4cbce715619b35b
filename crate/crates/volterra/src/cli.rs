//! Command-line interface: method inspection, single solves, a-priori
//! sweeps, and balancing-principle runs. Options may also come from a JSON
//! config file; explicit flags win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::json;

use crate::error::Error;
use crate::harness::{
    balance_csv, benchmark_problem, default_balance_noise_levels, run_apriori_sweep,
    run_balance_sweep, sweep_csv,
};
use crate::msm::{builtin, classify_stability, reflected, tail_bounds, REGISTRY};
use crate::solver::{solve_weightform, NoisySamples};
use crate::stepsize::{balance, balancing_constants, BalanceOptions};

#[derive(Parser)]
#[command(name = "volterra", version, about = "First-kind Volterra solver on multistep quadrature")]
struct Cli {
    /// RNG seed for noise generation
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// write tabular output to this CSV file
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// print results as JSON instead of plain text
    #[arg(long, global = true)]
    json: bool,
    /// JSON file with default option values (flags take precedence)
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect the method registry
    Methods {
        #[command(subcommand)]
        cmd: MethodsCmd,
    },
    /// Solve one problem instance on a fixed grid
    Solve(SolveArgs),
    /// A-priori sweep over dyadic grids with step-calibrated noise
    Sweep(SweepArgs),
    /// Balancing-principle step selection over noise levels
    Balance(BalanceArgs),
}

#[derive(Subcommand)]
enum MethodsCmd {
    /// List all built-in methods with their key properties
    List,
    /// Detailed report for one method
    Analyze { name: String },
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    method: Option<String>,
    /// built-in problem id (1-4)
    #[arg(long)]
    problem: Option<u32>,
    /// number of grid steps
    #[arg(long)]
    n_steps: Option<usize>,
    /// noise level (0 = exact data)
    #[arg(long)]
    delta: Option<f64>,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    problem: Option<u32>,
    /// smallest dyadic exponent
    #[arg(long)]
    nu_min: Option<u32>,
    /// largest dyadic exponent
    #[arg(long)]
    nu_max: Option<u32>,
    /// number of noise draws per grid (median reported)
    #[arg(long)]
    seeds: Option<usize>,
}

#[derive(Args)]
struct BalanceArgs {
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    problem: Option<u32>,
    /// noise level; may repeat. Defaults to 1e-5 * 4^-k, k = 0..5
    #[arg(long)]
    delta: Vec<f64>,
    /// acceptance factor; defaults to 2.05 * C2
    #[arg(long)]
    beta: Option<f64>,
    /// dyadic refinement exponent between ladder rungs
    #[arg(long)]
    kappa: Option<u32>,
    /// number of noise draws per level (median reported)
    #[arg(long)]
    seeds: Option<usize>,
}

/// Config-file counterpart of the flags.
#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct Config {
    method: Option<String>,
    problem: Option<u32>,
    n_steps: Option<usize>,
    delta: Option<f64>,
    deltas: Option<Vec<f64>>,
    beta: Option<f64>,
    kappa: Option<u32>,
    seed: Option<u64>,
    nu_min: Option<u32>,
    nu_max: Option<u32>,
    seeds: Option<usize>,
}

/// Run the CLI; returns the process exit code.
pub fn run() -> i32 {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::UnknownMethod(_)
        | Error::UnknownProblem(_)
        | Error::MethodNotAdmitted(_)
        | Error::InvalidMethod(_)
        | Error::Inconsistent(_)
        | Error::LengthMismatch { .. }
        | Error::EmptyLadder
        | Error::Invalid(_) => 2,
        Error::SingularMatrix { .. }
        | Error::NoConvergence { .. }
        | Error::ZeroConstantTerm
        | Error::NotSchur(_)
        | Error::TailNotConverged { .. }
        | Error::SingularSystem
        | Error::SingularStartSystem
        | Error::DiagonalKernelTooSmall { .. } => 3,
    }
}

fn load_config(path: &Option<PathBuf>) -> crate::Result<Config> {
    match path {
        None => Ok(Config::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Invalid(format!("cannot read config {}: {e}", p.display())))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("bad config {}: {e}", p.display())))
        }
    }
}

fn write_csv_file(path: &PathBuf, text: &str) -> crate::Result<()> {
    std::fs::write(path, text)
        .map_err(|e| Error::Invalid(format!("cannot write {}: {e}", path.display())))
}

fn dispatch(cli: Cli) -> crate::Result<()> {
    let cfg = load_config(&cli.config)?;
    let seed = cli.seed.or(cfg.seed).unwrap_or(0);
    match cli.cmd {
        Command::Methods { cmd } => methods(cmd, cli.json),
        Command::Solve(args) => solve(args, &cfg, seed, cli.json, &cli.csv),
        Command::Sweep(args) => sweep(args, &cfg, seed, cli.json, &cli.csv),
        Command::Balance(args) => run_balance_cmd(args, &cfg, seed, cli.json, &cli.csv),
    }
}

fn methods(cmd: MethodsCmd, as_json: bool) -> crate::Result<()> {
    match cmd {
        MethodsCmd::List => {
            let mut entries = Vec::new();
            for name in REGISTRY {
                let m = builtin(name)?;
                let st = classify_stability(&m);
                entries.push(json!({
                    "name": name,
                    "steps": m.m(),
                    "lag": m.mu(),
                    "order": m.p0(),
                    "nullstable": st.nullstable,
                    "sigma_schur": st.sigma_schur,
                    "admitted": m.is_admitted(),
                }));
            }
            if as_json {
                println!("{}", serde_json::to_string_pretty(&entries).unwrap());
            } else {
                println!(
                    "{:<16} {:>5} {:>4} {:>6} {:>11} {:>12} {:>9}",
                    "name", "steps", "lag", "order", "nullstable", "sigma_schur", "admitted"
                );
                for e in &entries {
                    println!(
                        "{:<16} {:>5} {:>4} {:>6} {:>11} {:>12} {:>9}",
                        e["name"].as_str().unwrap(),
                        e["steps"].to_string(),
                        e["lag"].to_string(),
                        e["order"].to_string(),
                        e["nullstable"].to_string(),
                        e["sigma_schur"].to_string(),
                        e["admitted"].to_string()
                    );
                }
            }
            Ok(())
        }
        MethodsCmd::Analyze { name } => {
            let m = builtin(&name)?;
            let st = classify_stability(&m);
            let mut report = json!({
                "name": name,
                "a": m.a(),
                "b": m.b(),
                "steps": m.m(),
                "lag": m.mu(),
                "order": m.p0(),
                "nullstable": st.nullstable,
                "sigma_schur": st.sigma_schur,
                "sigma_von_neumann": st.sigma_von_neumann,
                "admitted": m.is_admitted(),
                "rho_root_moduli": st.rho_roots.iter().map(|z| z.norm()).collect::<Vec<_>>(),
                "sigma_root_moduli": st.sigma_roots.iter().map(|z| z.norm()).collect::<Vec<_>>(),
            });
            if m.is_admitted() {
                let r = reflected(&m, 64)?;
                let t = tail_bounds(&r.gamma_inv)?;
                report["gamma_head"] = json!(&r.gamma.values()[..8.min(r.gamma.values().len())]);
                report["gamma_inv_abs_sum"] = json!(t.sum_abs);
                report["gamma_inv_weighted_sum"] = json!(t.sum_weighted);
            }
            if as_json {
                println!("{}", serde_json::to_string_pretty(&report).unwrap());
            } else {
                println!("method {name}");
                for key in [
                    "a",
                    "b",
                    "steps",
                    "lag",
                    "order",
                    "nullstable",
                    "sigma_schur",
                    "sigma_von_neumann",
                    "admitted",
                    "rho_root_moduli",
                    "sigma_root_moduli",
                    "gamma_head",
                    "gamma_inv_abs_sum",
                    "gamma_inv_weighted_sum",
                ] {
                    if let Some(v) = report.get(key) {
                        println!("  {key}: {v}");
                    }
                }
            }
            Ok(())
        }
    }
}

fn solve(
    args: SolveArgs,
    cfg: &Config,
    seed: u64,
    as_json: bool,
    csv: &Option<PathBuf>,
) -> crate::Result<()> {
    let method = builtin(&args.method.or_else(|| cfg.method.clone()).unwrap_or_else(|| "ab2".into()))?;
    let problem = benchmark_problem(args.problem.or(cfg.problem).unwrap_or(1))?;
    let n = args.n_steps.or(cfg.n_steps).unwrap_or(64);
    let delta = args.delta.or(cfg.delta).unwrap_or(0.0);

    let samples = if delta > 0.0 {
        NoisySamples::with_uniform_noise(&problem, n, delta, seed)
    } else {
        NoisySamples::exact(&problem, n)
    };
    let res = solve_weightform(&method, &problem, &samples, n)?;
    let max_err = problem.solution(0.0).map(|_| {
        res.max_error(|y| problem.solution(y).unwrap())
    });

    if let Some(path) = csv {
        let mut text = String::from("x,u\r\n");
        for (x, u) in res.points() {
            text.push_str(&format!("{x:.6e},{u:.6e}\r\n"));
        }
        write_csv_file(path, &text)?;
    }
    if as_json {
        let points: Vec<_> = res.points().map(|(x, u)| json!({"x": x, "u": u})).collect();
        let out = json!({
            "method": res.method(),
            "n_steps": n,
            "h": res.h(),
            "delta": delta,
            "max_error": max_err,
            "points": points,
        });
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!(
            "method {} n_steps {n} h {:.4e} delta {delta:.1e}",
            res.method(),
            res.h()
        );
        if let Some(e) = max_err {
            println!("max error vs known solution: {e:.4e}");
        }
        for (x, u) in res.points().step_by((n / 8).max(1)) {
            println!("  u({x:.4}) = {u:+.6e}");
        }
    }
    Ok(())
}

fn sweep(
    args: SweepArgs,
    cfg: &Config,
    seed: u64,
    as_json: bool,
    csv: &Option<PathBuf>,
) -> crate::Result<()> {
    let method = builtin(&args.method.or_else(|| cfg.method.clone()).unwrap_or_else(|| "ab2".into()))?;
    let problem = benchmark_problem(args.problem.or(cfg.problem).unwrap_or(1))?;
    let nu_min = args.nu_min.or(cfg.nu_min).unwrap_or(5);
    let nu_max = args.nu_max.or(cfg.nu_max).unwrap_or(9);
    let seeds = args.seeds.or(cfg.seeds).unwrap_or(5);
    if nu_min > nu_max {
        return Err(Error::Invalid("nu_min exceeds nu_max".into()));
    }

    let rows = run_apriori_sweep(&method, &problem, nu_min..=nu_max, seeds, seed)?;
    let text = sweep_csv(&rows);
    if let Some(path) = csv {
        write_csv_file(path, &text)?;
    }
    if as_json {
        let out: Vec<_> = rows
            .iter()
            .map(|r| {
                json!({
                    "nu": r.nu, "n_steps": r.n_steps, "delta": r.delta,
                    "rel_delta_pct": r.rel_delta_pct, "err": r.err, "ratio": r.ratio,
                })
            })
            .collect();
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        print!("{}", text.replace("\r\n", "\n"));
    }
    Ok(())
}

fn run_balance_cmd(
    args: BalanceArgs,
    cfg: &Config,
    seed: u64,
    as_json: bool,
    csv: &Option<PathBuf>,
) -> crate::Result<()> {
    let method = builtin(&args.method.or_else(|| cfg.method.clone()).unwrap_or_else(|| "ab2".into()))?;
    let problem = benchmark_problem(args.problem.or(cfg.problem).unwrap_or(4))?;
    let deltas = if !args.delta.is_empty() {
        args.delta.clone()
    } else if let Some(d) = &cfg.deltas {
        d.clone()
    } else {
        default_balance_noise_levels()
    };
    let beta = args.beta.or(cfg.beta);
    let kappa = args.kappa.or(cfg.kappa).unwrap_or(1);
    let seeds = args.seeds.or(cfg.seeds).unwrap_or(5);

    let constants = balancing_constants(&method, &problem, None)?;
    let rows = run_balance_sweep(&method, &problem, &deltas, beta, kappa, seeds, seed)?;
    let text = balance_csv(&rows);
    if let Some(path) = csv {
        write_csv_file(path, &text)?;
    }
    if as_json {
        // include one detailed run per level for the first seed
        let mut levels = Vec::new();
        for (r, &delta) in rows.iter().zip(&deltas) {
            let opts = BalanceOptions {
                beta,
                kappa,
                h_max: None,
                seed,
            };
            let out = balance(&method, &problem, delta, &opts)?;
            levels.push(json!({
                "delta": r.delta,
                "n_chosen": r.n_chosen,
                "h_over_sqrt_delta": r.h_over_sqrt_delta,
                "err_over_sqrt_delta": r.err_over_sqrt_delta,
                "ladder": out.ladder.steps(),
                "rungs_solved": out.n_solves,
            }));
        }
        let out = json!({
            "method": method.name(),
            "beta": beta.unwrap_or_else(|| constants.default_beta()),
            "c2": constants.c2,
            "levels": levels,
        });
        println!("{}", serde_json::to_string_pretty(&out).unwrap());
    } else {
        println!(
            "balancing with beta = {:.4} (C2 = {:.4})",
            beta.unwrap_or_else(|| constants.default_beta()),
            constants.c2
        );
        print!("{}", text.replace("\r\n", "\n"));
    }
    Ok(())
}
