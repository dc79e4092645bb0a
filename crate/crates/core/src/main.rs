use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use heatflux::bench::{
    self, case_csv, convergence_csv, load_case, run_case, run_convergence, run_sweep, sweep_csv, write_outputs,
    CaseResult, ConvergenceConfig, RunOptions, SweepConfig, EXIT_CONFIG,
};
use heatflux::{par, Error};

#[derive(Parser)]
#[command(name = "heatflux", version, about = "Verification driver for the flux-coupled heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// directory for CSV and JSON reports
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// multiplies every check tolerance
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,
    /// worker threads for sweeps and ladders
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// use raw double quadrature in the Green-function assembly
    #[arg(long, global = true)]
    slow_oracles: bool,
}

#[derive(Subcommand)]
enum Command {
    /// run the checks of one case file, or of every case file in a directory
    Run { config: PathBuf },
    /// expand a parameter grid and run every case
    Sweep { config: PathBuf },
    /// finite-difference refinement study
    Convergence { config: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if !(cli.tol_scale > 0.0) {
        eprintln!("error: --tol-scale must be positive");
        return ExitCode::from(EXIT_CONFIG as u8);
    }
    let opts = RunOptions {
        tol_scale: cli.tol_scale,
        slow_oracles: cli.slow_oracles,
        skip_fd: false,
    };
    let code = par::with_jobs(cli.jobs, || match &cli.command {
        Command::Run { config } => run(config, &cli.out, &opts),
        Command::Sweep { config } => sweep(config, &cli.out, &opts),
        Command::Convergence { config } => convergence(config, &cli.out),
    });
    ExitCode::from(code as u8)
}

fn config_error(path: &Path, e: &Error) -> i32 {
    eprintln!("error: {}: {e}", path.display());
    EXIT_CONFIG
}

fn summarize(r: &CaseResult) {
    let verdict = if r.pass { "PASS" } else { "FAIL" };
    println!("{verdict} {} ({} checks, {:.0} ms)", r.id, r.checks.len(), r.elapsed_ms);
    for c in r.failures() {
        println!("  failed {}: |{} - {}| = {:e} > {:e} {}", c.check, c.lhs, c.rhs, c.abs_diff, c.tolerance, c.note);
    }
}

fn run(config: &Path, out: &Path, opts: &RunOptions) -> i32 {
    let files = if config.is_dir() {
        match bench::catalog_files(config) {
            Ok(f) => f,
            Err(e) => return config_error(config, &e),
        }
    } else {
        vec![config.to_path_buf()]
    };
    let mut cases = Vec::new();
    for f in &files {
        match load_case(f) {
            Ok(c) => cases.push(c),
            Err(e) => return config_error(f, &e),
        }
    }
    let results = par::map(&cases, |c| run_case(c, opts));
    let mut ok = Vec::new();
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(r) => ok.push(r),
            Err(e) => return config_error(f, &e),
        }
    }
    ok.iter().for_each(summarize);
    let stem = if config.is_dir() {
        "catalog".to_string()
    } else {
        ok[0].id.clone()
    };
    let written = case_csv(&ok).and_then(|csv| write_outputs(out, &stem, &csv, &ok));
    if let Err(e) = written {
        return config_error(out, &e);
    }
    bench::exit_code(ok.iter().all(|r| r.pass))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Error> {
    let text = std::fs::read_to_string(path)?;
    Ok(serde_json::from_str(&text)?)
}

fn sweep(config: &Path, out: &Path, opts: &RunOptions) -> i32 {
    let cfg: SweepConfig = match read_json(config) {
        Ok(c) => c,
        Err(e) => return config_error(config, &e),
    };
    let rows = match run_sweep(&cfg, opts) {
        Ok(r) => r,
        Err(e) => return config_error(config, &e),
    };
    let failed = rows.iter().filter(|r| !matches!(&r.result, Ok(c) if c.pass)).count();
    println!("{}: {} cases, {} failed", cfg.id, rows.len(), failed);
    if let Err(e) = sweep_csv(&cfg, &rows).and_then(|csv| write_outputs(out, &cfg.id, &csv, &rows)) {
        return config_error(out, &e);
    }
    bench::exit_code(failed == 0)
}

fn convergence(config: &Path, out: &Path) -> i32 {
    let cfg: ConvergenceConfig = match read_json(config) {
        Ok(c) => c,
        Err(e) => return config_error(config, &e),
    };
    let res = match run_convergence(&cfg) {
        Ok(r) => r,
        Err(e) => return config_error(config, &e),
    };
    for row in &res.report.rows {
        println!("dx={:.4e} dt={:.4e} err_max={:.4e} err_l2={:.4e}", row.dx, row.dt, row.errors.max, row.errors.l2);
    }
    println!(
        "order max={:.3} l2={:.3} monotone={}",
        res.report.order_max, res.report.order_l2, res.report.monotone
    );
    let stem = format!("{}_convergence", res.id);
    if let Err(e) = convergence_csv(&res).and_then(|csv| write_outputs(out, &stem, &csv, &res)) {
        return config_error(out, &e);
    }
    bench::exit_code(res.pass)
}
