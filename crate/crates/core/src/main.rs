use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use l0est::config::Config;
use l0est::design::{DesignMatrix, SparseParam};
use l0est::error::{Error, Result};
use l0est::estimator::{fit, FitProblem};
use l0est::grids;
use l0est::harness::{self, ControlReport, TailReport};

#[derive(Parser)]
#[command(name = "l0est", version, about = "L0-penalized sparse nonlinear regression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// JSON configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Design matrix CSV (no header).
    #[arg(long, global = true)]
    x: Option<PathBuf>,
    /// Response CSV, one value per line.
    #[arg(long, global = true)]
    y: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Theorem constants for the configured design.
    Bounds,
    /// Fit the estimator to --x and --y.
    Fit,
    /// Monte Carlo coverage experiment.
    Coverage,
    /// Covering grid for the configured domain.
    Grid,
    /// Empirical checks of the noise tail and the control event.
    Verify,
}

#[derive(Serialize)]
struct VerifyOutput {
    #[serde(skip_serializing_if = "Option::is_none")]
    tail: Option<TailReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    control: Option<ControlReport>,
}

#[derive(Serialize)]
struct GridOutput {
    size: usize,
    h: usize,
    domain_radius: f64,
    sphere_radius: f64,
    cardinality_bound: f64,
    within_bound: bool,
    points: Vec<grids::GridExportEntry>,
}

fn load_config(cli: &Cli) -> Result<Config> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config("--config is required".into()))?;
    let mut cfg = Config::from_path(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn design(cli: &Cli, cfg: &Config) -> Result<DesignMatrix> {
    match &cli.x {
        Some(path) => DesignMatrix::from_csv_path(path),
        None => harness::experiment_design(cfg),
    }
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(true).trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        for field in rec?.iter().filter(|s| !s.is_empty()) {
            let v: f64 =
                field.parse().map_err(|_| Error::Parse(format!("{}: bad number {field:?}", path.display())))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("{}: non-finite value", path.display())));
            }
            out.push(v);
        }
    }
    Ok(out)
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Prints to stdout, or writes `name` under --out.
fn emit(cli: &Cli, name: &str, json: String) -> Result<()> {
    match &cli.out {
        Some(dir) => {
            let path = write_file(dir, name, &json)?;
            if !cli.quiet {
                eprintln!("wrote {}", path.display());
            }
        }
        None => println!("{json}"),
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = load_config(cli)?;
    match cli.command {
        Command::Bounds => {
            let x = design(cli, &cfg)?;
            emit(cli, "bounds.json", to_json(&cfg.bounds_report(&x)?)?)
        }
        Command::Fit => {
            let xp = cli.x.as_ref().ok_or_else(|| Error::Config("fit needs --x".into()))?;
            let yp = cli.y.as_ref().ok_or_else(|| Error::Config("fit needs --y".into()))?;
            let x = DesignMatrix::from_csv_path(xp)?;
            let y = read_vector(yp)?;
            let c_r = match cfg.c_r {
                Some(c) => c,
                None => cfg.bounds_report(&x)?.c_r,
            };
            let mut problem = FitProblem::new(x.clone(), y, cfg.loss(), cfg.domain_spec(&x)?, c_r)?;
            problem.controls = cfg.controls;
            problem.mode = cfg.search;
            let res = fit(&problem)?;
            if !cli.quiet {
                eprintln!("support {:?}, objective {}", res.support, res.objective);
            }
            if let Some(dir) = &cli.out {
                let lines: Vec<String> =
                    res.log.iter().map(serde_json::to_string).collect::<std::result::Result<_, _>>()?;
                write_file(dir, "support_log.jsonl", &(lines.join("\n") + "\n"))?;
            }
            emit(cli, "fit.json", to_json(&res)?)
        }
        Command::Coverage => {
            let res = harness::run_coverage(&cfg)?;
            if !cli.quiet {
                eprintln!(
                    "coverage {:.4} ({} / {}), Wilson lower {:.4}, target {:.2}: {}",
                    res.coverage,
                    res.hits,
                    res.replicates.len(),
                    res.wilson_lower,
                    res.target,
                    if res.pass { "pass" } else { "fail" }
                );
            }
            if let Some(dir) = &cli.out {
                fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
                let file = fs::File::create(dir.join("replicates.csv")).map_err(|e| Error::Io(e.to_string()))?;
                harness::write_replicates_csv(&res, file)?;
            }
            emit(cli, "summary.json", to_json(&res)?)
        }
        Command::Grid => {
            let x = design(cli, &cfg)?;
            let g = cfg.build_grid(&x)?;
            let out = GridOutput {
                size: g.len(),
                h: g.h,
                domain_radius: g.domain_radius,
                sphere_radius: g.sphere_radius,
                cardinality_bound: g.cardinality_bound,
                within_bound: g.within_bound,
                points: grids::export(&g),
            };
            emit(cli, "grid.json", to_json(&out)?)
        }
        Command::Verify => {
            let v = cfg.verify.clone().ok_or_else(|| Error::Config("verify needs a verify block".into()))?;
            if v.tail.is_none() && v.control.is_none() {
                return Err(Error::Config("verify block has neither tail nor control".into()));
            }
            let tail = v
                .tail
                .as_ref()
                .map(|t| harness::verify_tail(&t.noise, t.n, t.trials, t.directions, cfg.seed))
                .transpose()?;
            let control = match &v.control {
                Some(c) => {
                    let x = design(cli, &cfg)?;
                    let center = SparseParam::zeros(x.p());
                    let f = cfg.link();
                    Some(harness::verify_control_event(
                        &x,
                        f.as_ref(),
                        &center,
                        &c.noise,
                        cfg.q,
                        c.k_check,
                        c.trials,
                        cfg.seed,
                    )?)
                }
                None => None,
            };
            emit(cli, "verify.json", to_json(&VerifyOutput { tail, control })?)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
