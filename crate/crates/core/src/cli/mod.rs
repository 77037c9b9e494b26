//! Command-line front end.
//!
//! ```text
//! fracsparse [--out DIR] [--print-config] [-v] solve <CFG>
//! fracsparse [--out DIR] [--print-config] [-v] table <CFG> --kind support|convergence|mesh
//! fracsparse check
//! ```
//!
//! `<CFG>` is a TOML file (see [`crate::config`]) or `@example_1d` /
//! `@example_2d` for a built-in preset. Exit codes: 0 success, 1
//! configuration or input error (nothing written), 2 nonconvergence
//! (outputs kept). `FRACSPARSE_THREADS` bounds the worker pool.

pub mod check;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::analysis::{dump_fields, run_convergence_table, run_mesh_study, run_support_sweep, PresetName, SweepParam};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::mm::{mm_solve, SolveReport, Status};
use crate::problem::sample_spacetime;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_NONCONVERGENCE: i32 = 2;

pub const THREADS_ENV: &str = "FRACSPARSE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracsparse", version, about = "Spatially sparse optimal control with fractional regularization")]
pub struct Cli {
    /// Output directory (overrides `output.dir`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Print the effective configuration and exit without solving.
    #[arg(long, global = true)]
    pub print_config: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solve; writes report.csv, stationarity.toml, config.toml and fields/.
    Solve { config: String },
    /// Produce one table from the sweep lists of the configuration.
    Table {
        config: String,
        #[arg(long, value_enum)]
        kind: TableKind,
    },
    /// Run the built-in invariant suite.
    Check,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableKind {
    Support,
    Convergence,
    Mesh,
}

pub fn main() -> i32 {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).try_init();
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    run(&cli)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} = {v:?} is not a positive integer")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(e.to_string()))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

pub fn run(cli: &Cli) -> i32 {
    match &cli.command {
        Command::Check => cmd_check(),
        Command::Solve { config } => with_config(cli, config, None, cmd_solve),
        Command::Table { config, kind } => with_config(cli, config, Some(*kind), |cfg, dir| cmd_table(cfg, *kind, dir)),
    }
}

/// Load and validate; on any problem report it and return exit 1 before
/// anything is written.
fn with_config(
    cli: &Cli,
    source: &str,
    kind: Option<TableKind>,
    body: impl FnOnce(&RunConfig, &Path) -> Result<i32>,
) -> i32 {
    let cfg = match load_config(source).and_then(|c| {
        if let Some(k) = kind {
            check_sweep(&c, k)?;
        }
        Ok(c)
    }) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    if cli.print_config {
        print!("{}", cfg.to_toml());
        return EXIT_OK;
    }
    let dir = cli.out.clone().unwrap_or_else(|| cfg.output.dir.clone());
    match body(&cfg, &dir) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::NonConvergence { .. } | Error::LkSearch(_) => EXIT_NONCONVERGENCE,
                _ => EXIT_CONFIG,
            }
        }
    }
}

pub fn load_config(source: &str) -> Result<RunConfig> {
    match source.strip_prefix('@') {
        Some("example_1d") => RunConfig::for_preset(PresetName::Example1d),
        Some("example_2d") => RunConfig::for_preset(PresetName::Example2d),
        Some(other) => Err(Error::InvalidArgument(format!(
            "unknown built-in preset `@{other}` (expected @example_1d or @example_2d)"
        ))),
        None => RunConfig::load(Path::new(source)),
    }
}

fn check_sweep(cfg: &RunConfig, kind: TableKind) -> Result<()> {
    let s = &cfg.sweep;
    let missing = |key: &str| Err(Error::InvalidArgument(format!("sweep.{key} is empty")));
    match kind {
        TableKind::Support => match s.support {
            SweepParam::Gamma if s.gamma.is_empty() => missing("gamma"),
            SweepParam::P if s.p.is_empty() => missing("p"),
            _ => Ok(()),
        },
        TableKind::Convergence if s.checkpoints.is_empty() => missing("checkpoints"),
        TableKind::Mesh if s.n.is_empty() => missing("n"),
        TableKind::Mesh if s.n_ref < 2 => Err(Error::InvalidArgument("sweep.n_ref is not set".into())),
        _ => Ok(()),
    }
}

fn exit_for(status: &Status) -> i32 {
    match status {
        Status::Converged => EXIT_OK,
        _ => EXIT_NONCONVERGENCE,
    }
}

pub fn cmd_solve(cfg: &RunConfig, dir: &Path) -> Result<i32> {
    let exp = cfg.experiment();
    let spec = exp.build()?;
    log::info!(
        "solving: N = {}, M = {}, gamma = {}, p = {}",
        spec.n(),
        spec.m(),
        spec.params.gamma,
        spec.params.p
    );
    let (state, report) = mm_solve(&spec, &cfg.mm)?;
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join("report.csv"), report.to_csv())?;
    std::fs::write(dir.join("stationarity.toml"), stationarity_toml(&report))?;
    if cfg.output.dump_fields {
        let u_d = sample_spacetime(&spec.mesh, &spec.grid, |t, x| exp.target.eval(t, x));
        dump_fields(&state, &spec.mesh, &spec.grid, Some(&u_d), &dir.join("fields"))?;
    }
    match &report.status {
        Status::Converged => {}
        Status::MaxIterations => eprintln!("warning: no convergence within {} outer iterations", cfg.mm.max_outer),
        Status::Failed(m) => eprintln!("warning: outer loop stopped: {m}"),
    }
    Ok(exit_for(&report.status))
}

fn stationarity_toml(report: &SolveReport) -> String {
    #[derive(serde::Serialize)]
    struct Summary<'a> {
        status: String,
        iterations: usize,
        phi0_final: f64,
        phi0_limit: f64,
        snapped_entries: usize,
        support: &'a crate::mm::SupportFraction,
        limit: &'a crate::subqp::StationarityReport,
        raw: &'a crate::subqp::StationarityReport,
    }
    let s = Summary {
        status: match &report.status {
            Status::Converged => "converged".into(),
            Status::MaxIterations => "max_iterations".into(),
            Status::Failed(m) => format!("failed: {m}"),
        },
        iterations: report.records.len(),
        phi0_final: report.final_phi0().unwrap_or(f64::NAN),
        phi0_limit: report.phi0_limit,
        snapped_entries: report.snapped,
        support: &report.support,
        limit: &report.stationarity,
        raw: &report.stationarity_raw,
    };
    let mut out = String::from(
        "# stationarity of the final iterate: [limit] after setting w <= support_tol * max w to zero, [raw] as computed\n",
    );
    out.push_str(&toml::to_string(&s).unwrap_or_default());
    out
}

pub fn cmd_table(cfg: &RunConfig, kind: TableKind, dir: &Path) -> Result<i32> {
    let exp = cfg.experiment();
    let s = &cfg.sweep;
    let (name, csv, ok) = match kind {
        TableKind::Support => {
            let values = match s.support {
                SweepParam::Gamma => &s.gamma,
                SweepParam::P => &s.p,
            };
            let t = run_support_sweep(&exp, &cfg.mm, s.support, values)?;
            let ok = t.rows.iter().all(|r| r.status == "converged");
            ("support.csv", t.to_csv(), ok)
        }
        TableKind::Convergence => {
            let t = run_convergence_table(&exp, &cfg.mm, &s.checkpoints)?;
            let ok = t.status == "converged";
            ("convergence.csv", t.to_csv(), ok)
        }
        TableKind::Mesh => {
            let t = run_mesh_study(&exp, &cfg.mm, &s.n, s.n_ref)?;
            let ok = t.rows.iter().all(|r| r.status == "converged");
            ("mesh.csv", t.to_csv(), ok)
        }
    };
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml())?;
    std::fs::write(dir.join(name), csv)?;
    Ok(if ok { EXIT_OK } else { EXIT_NONCONVERGENCE })
}

pub fn cmd_check() -> i32 {
    let results = check::run_all();
    let mut failed = 0;
    for r in &results {
        if r.passed {
            println!("PASS {:<22} {:>6.2}s  {}", r.name, r.seconds, r.detail);
        } else {
            failed += 1;
            println!("FAIL {:<22} {:>6.2}s  {}", r.name, r.seconds, r.detail);
        }
    }
    println!("{} of {} invariants passed", results.len() - failed, results.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_CONFIG
    }
}
