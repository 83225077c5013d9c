//! Command-line front end for heralding-circuit design.

mod config;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use herald_core::circuits::{
    clements_decompose, format_amplitude_table, optimal_x, success_curve, verify_heralded_state,
};
use herald_core::feasibility::{build_gamma, optical_residual};
use herald_core::fock::{lift_unitary, ScatteringMatrix};
use herald_core::herald::fidelity_diagnostic;
use herald_core::io;
use herald_core::solver::{
    baseline_pfp, multistart, optimize, run_seed, BaselineConfig, MultistartSummary,
};
use serde::Serialize;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "herald",
    about = "Design linear-optical heralding circuits in full Fock space",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one optimization from a seeded random feasible start.
    Run {
        /// Problem config file.
        config: PathBuf,
        /// Seed override for the initial point.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory for the final U and extracted S (matrix text format).
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Many independent runs; emits a CSV of terminal states and a cluster summary JSON.
    Multistart {
        config: PathBuf,
        #[arg(long)]
        runs: Option<usize>,
        /// Worker threads (also capped by HERALD_THREADS).
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV path; a summary is written next to it with extension .json.
        #[arg(long, default_value = "results.csv")]
        out: PathBuf,
    },
    /// Direct P F^p ascent over scattering matrices (conventional baseline).
    Baseline {
        config: PathBuf,
        /// Merit exponent p.
        #[arg(long)]
        p: f64,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "baseline.csv")]
        out: PathBuf,
    },
    /// Verify a scattering matrix file against a problem: fidelity,
    /// probability, optical residual and the heralded amplitude table.
    Verify {
        /// Scattering matrix in the shared matrix text format.
        s_file: PathBuf,
        config: PathBuf,
    },
    /// Decompose a scattering matrix into a rectangular splitter mesh.
    Decompose {
        s_file: PathBuf,
    },
    /// Closed-form six-mode Bell analysis: the optimum of the success curve
    /// and a sampled (x, P) table.
    AnalyticBell {
        #[arg(long, default_value = "bell_curve.csv")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match dispatch(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            // config/usage problems exit 2, runtime failures exit 1
            if err.is::<ConfigError>() {
                2
            } else {
                1
            }
        }
    };
    std::process::exit(code);
}

/// Marker for usage/config errors (exit code 2).
#[derive(Debug)]
struct ConfigError(anyhow::Error);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        self.0.fmt(f)
    }
}

impl std::error::Error for ConfigError {}

fn usage_err(err: anyhow::Error) -> anyhow::Error {
    anyhow!(ConfigError(err))
}

fn worker_count(requested: Option<usize>) -> usize {
    let hard_cap = std::env::var("HERALD_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&v| v > 0);
    let base = requested
        .or(hard_cap)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1));
    match hard_cap {
        Some(cap) => base.min(cap),
        None => base,
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Run { config, seed, out } => cmd_run(&config, seed, &out),
        Command::Multistart {
            config,
            runs,
            workers,
            seed,
            out,
        } => cmd_multistart(&config, runs, workers, seed, &out),
        Command::Baseline {
            config,
            p,
            runs,
            seed,
            out,
        } => cmd_baseline(&config, p, runs, seed, &out),
        Command::Verify { s_file, config } => cmd_verify(&s_file, &config),
        Command::Decompose { s_file } => cmd_decompose(&s_file),
        Command::AnalyticBell { out } => cmd_analytic_bell(&out),
    }
}

fn cmd_run(config: &Path, seed: Option<u64>, out: &Path) -> Result<i32> {
    let cfg = config::load_config(config).map_err(usage_err)?;
    let prob = cfg.problem().map_err(usage_err)?;
    let solver_cfg = cfg.solver_config(seed);
    let res = optimize(&prob, &solver_cfg)?;
    let (f_diag, p_diag) = fidelity_diagnostic(&res.u_final, &prob);
    println!("status      {}", res.status.as_str());
    println!("iterations  {}", res.iterations);
    println!("R           {:.6e}", res.r_final);
    println!("P           {:.10}", res.p_final);
    println!("F           {:.10}", f_diag);
    println!("N_DoF       {}", res.tangent_dof);
    println!("max |(1-aa*)c| along run: {:.3e}", res.max_fidelity_residual);
    let _ = p_diag;
    std::fs::create_dir_all(out)
        .with_context(|| format!("creating output directory {}", out.display()))?;
    io::write_matrix(&out.join("u_final.txt"), res.u_final.matrix())?;
    println!("wrote {}", out.join("u_final.txt").display());
    if let Some(s) = &res.s_extracted {
        io::write_matrix(&out.join("s_extracted.txt"), s.matrix())?;
        println!("wrote {}", out.join("s_extracted.txt").display());
    } else {
        println!("no scattering matrix extracted (terminal point not feasible enough)");
    }
    Ok(0)
}

#[derive(Serialize)]
struct ClusterOut {
    p: f64,
    count: usize,
    min: f64,
    max: f64,
}

#[derive(Serialize)]
struct SummaryOut {
    runs: usize,
    feasible: usize,
    eps_r: f64,
    clusters: Vec<ClusterOut>,
}

fn write_multistart_outputs(
    summary: &MultistartSummary,
    eps_r: f64,
    out: &Path,
) -> Result<()> {
    let mut csv = String::from("run_id,seed,status,R,P,iterations,wall_ms\n");
    for (idx, r) in summary.results.iter().enumerate() {
        let _ = writeln!(
            csv,
            "{},{},{},{:.17e},{:.17e},{},{}",
            idx,
            r.seed,
            r.status.as_str(),
            r.r_final,
            r.p_final,
            r.iterations,
            r.wall_ms
        );
    }
    std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    let json = SummaryOut {
        runs: summary.results.len(),
        feasible: summary.feasible_count,
        eps_r,
        clusters: summary
            .clusters
            .iter()
            .map(|c| ClusterOut {
                p: c.center,
                count: c.count,
                min: c.min,
                max: c.max,
            })
            .collect(),
    };
    let json_path = out.with_extension("json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&json)?)
        .with_context(|| format!("writing {}", json_path.display()))?;
    Ok(())
}

fn cmd_multistart(
    config: &Path,
    runs: Option<usize>,
    workers: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<i32> {
    let cfg = config::load_config(config).map_err(usage_err)?;
    let prob = cfg.problem().map_err(usage_err)?;
    let runs = runs.or(cfg.runs).unwrap_or(100);
    if runs == 0 {
        return Err(usage_err(anyhow!("runs must be >= 1")));
    }
    let workers = worker_count(workers.or(cfg.workers));
    let solver_cfg = cfg.solver_config(seed);
    let summary = multistart(&prob, &solver_cfg, runs, workers)?;
    write_multistart_outputs(&summary, solver_cfg.eps_r, out)?;
    println!(
        "{} runs, {} feasible (R <= {:.1e})",
        runs, summary.feasible_count, solver_cfg.eps_r
    );
    for c in &summary.clusters {
        println!("  P ~ {:.6}  x{}", c.center, c.count);
    }
    println!("wrote {} and {}", out.display(), out.with_extension("json").display());
    Ok(0)
}

fn cmd_baseline(
    config: &Path,
    p: f64,
    runs: Option<usize>,
    seed: Option<u64>,
    out: &Path,
) -> Result<i32> {
    let cfg = config::load_config(config).map_err(usage_err)?;
    if p < 1.0 {
        return Err(usage_err(anyhow!("merit exponent p must be >= 1, got {p}")));
    }
    let prob = cfg.problem().map_err(usage_err)?;
    let runs = runs.or(cfg.runs).unwrap_or(100);
    if runs == 0 {
        return Err(usage_err(anyhow!("runs must be >= 1")));
    }
    let base_seed = seed.or(cfg.seed).unwrap_or(0);
    let mut csv = String::from("run_id,seed,F,P,iterations,grad_norm,converged\n");
    for idx in 0..runs {
        let run_cfg = BaselineConfig {
            p_exponent: p,
            seed: run_seed(base_seed, idx),
            ..Default::default()
        };
        let res = baseline_pfp(&prob, &run_cfg)?;
        let _ = writeln!(
            csv,
            "{},{},{:.17e},{:.17e},{},{:.3e},{}",
            idx, run_cfg.seed, res.fidelity, res.probability, res.iterations, res.grad_norm,
            res.converged
        );
    }
    std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(0)
}

fn cmd_verify(s_file: &Path, config: &Path) -> Result<i32> {
    let cfg = config::load_config(config).map_err(usage_err)?;
    let prob = cfg.problem().map_err(usage_err)?;
    let matrix = io::read_matrix(s_file)?;
    let s = match ScatteringMatrix::new(matrix) {
        Ok(s) => s,
        Err(e) => {
            bail!("scattering matrix rejected: {e}");
        }
    };
    if s.modes() != prob.space().modes() {
        return Err(usage_err(anyhow!(
            "matrix has {} modes, config expects {}",
            s.modes(),
            prob.space().modes()
        )));
    }
    let verified = verify_heralded_state(&s, &prob)?;
    let u = lift_unitary(&s, prob.space())?;
    let gb = build_gamma(prob.space())?;
    let (r, _) = optical_residual(&u, &gb);
    print!("{}", format_amplitude_table(&verified));
    println!("R(lift(S)) = {:.6e}", r);
    Ok(0)
}

fn cmd_decompose(s_file: &Path) -> Result<i32> {
    let matrix = io::read_matrix(s_file)?;
    let s = ScatteringMatrix::new(matrix).map_err(|e| anyhow!("scattering matrix rejected: {e}"))?;
    let mesh = clements_decompose(&s)?;
    print!("{}", mesh.export_text());
    let err = herald_core::linalg::max_abs_diff(&mesh.recompose(), s.matrix());
    println!("splitters: {}", mesh.splitter_count());
    println!("recomposition error: {:.3e}", err);
    Ok(0)
}

fn cmd_analytic_bell(out: &Path) -> Result<i32> {
    let x_star = optimal_x();
    println!("x*      = {:.8}", x_star);
    println!("P(x*)   = {:.8}", success_curve(x_star));
    println!("P(1/3)  = {:.8}  (= 2/27)", success_curve(1.0 / 3.0));
    let mut csv = String::from("x,P\n");
    for k in 1..=200 {
        let x = k as f64 / 201.0;
        let _ = writeln!(csv, "{:.17e},{:.17e}", x, success_curve(x));
    }
    std::fs::write(out, csv).with_context(|| format!("writing {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(0)
}
