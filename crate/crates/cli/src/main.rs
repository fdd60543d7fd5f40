//! `conexp`: critical exponents of nonlocal operators in cones.

mod config;
mod runner;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use cone_exponents::cache::ExponentCache;
use cone_exponents::liouville::liouville_threshold;
use cone_exponents::roots::linspace;
use cone_exponents::ConeSpec;
use serde_json::json;
use thiserror::Error;

use config::RunConfig;
use runner::{unix_now, Runner};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("task {task} failed: {source}")]
    Numerical { task: String, source: cone_exponents::Error },
    #[error("cannot write output: {0}")]
    Output(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Output(_) => 2,
            CliError::Numerical { .. } => 3,
        }
    }
}

#[derive(Parser)]
#[command(name = "conexp", version, about = "Critical exponents of nonlocal extremal operators in cones")]
struct Cli {
    /// Worker threads; defaults to the config value, then to all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks listed in a config file.
    Run { config: PathBuf },
    /// Run the acceptance suite at the configured resolution.
    Verify {
        /// Comma-separated criterion numbers; all when omitted.
        #[arg(long, value_delimiter = ',')]
        criteria: Vec<u8>,
        config: PathBuf,
    },
    /// Critical exponents over a range of cone openings.
    Sweep {
        #[arg(long, value_enum)]
        param: Param,
        #[arg(long)]
        from: f64,
        #[arg(long)]
        to: f64,
        /// Number of intervals; the sweep has steps + 1 points.
        #[arg(long)]
        steps: usize,
        config: PathBuf,
    },
    /// List the records of an exponent cache.
    ShowCache { path: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum Param {
    /// Planar sector aperture.
    Aperture,
    /// Half-angle of a circular cap in three dimensions.
    HalfAngle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("conexp: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

fn setup(path: &Path, threads: Option<usize>, require_tasks: bool) -> Result<Runner, CliError> {
    let cfg = RunConfig::load(path)?;
    cfg.check(require_tasks)?;
    if threads == Some(0) {
        return Err(CliError::Config("threads must be positive".into()));
    }
    if let Some(n) = threads.or(cfg.threads) {
        // fails only if a pool already exists, which is harmless
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    cfg.prepare_output()?;
    Runner::new(cfg)
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { config } => setup(&config, cli.threads, true)?.run_all(),
        Command::Verify { criteria, config } => {
            let mut runner = setup(&config, cli.threads, false)?;
            println!("criterion  result  seconds");
            let rep = runner.verify(&criteria, |o| println!("{o}  ({:.1}s)", o.seconds));
            let failed = rep.table.rows.iter().filter(|r| r[2] == "false").count();
            println!("{} of {} criteria passed", rep.table.rows.len() - failed, rep.table.rows.len());
            write_verify(&runner, &rep)?;
            Ok(rep.pass)
        }
        Command::Sweep { param, from, to, steps, config } => sweep(&config, cli.threads, param, from, to, steps),
        Command::ShowCache { path } => show_cache(&path),
    }
}

fn write_verify(runner: &Runner, rep: &runner::TaskReport) -> Result<(), CliError> {
    let out = |e: &dyn std::fmt::Display| CliError::Output(e.to_string());
    let mut w = csv::Writer::from_path(runner.cfg.report_path("verify", "csv")).map_err(|e| out(&e))?;
    w.write_record(&rep.table.header).map_err(|e| out(&e))?;
    for row in &rep.table.rows {
        w.write_record(row).map_err(|e| out(&e))?;
    }
    w.flush().map_err(|e| out(&e))?;
    let json = json!({
        "task": "verify",
        "passed": rep.pass,
        "generated_unix": unix_now(),
        "quadrature": runner.cfg.quadrature,
        "resolution": runner.cfg.resolution,
        "data": rep.data,
    });
    let text = serde_json::to_string_pretty(&json).map_err(|e| out(&e))?;
    std::fs::write(runner.cfg.report_path("verify", "json"), text).map_err(|e| out(&e))
}

fn sweep(path: &Path, threads: Option<usize>, param: Param, from: f64, to: f64, steps: usize) -> Result<bool, CliError> {
    let mut runner = setup(path, threads, false)?;
    if steps == 0 || !from.is_finite() || !to.is_finite() {
        return Err(CliError::Config("sweep needs finite bounds and at least one step".into()));
    }
    let dim = runner.cfg.cone.dimension;
    let name = match (param, dim) {
        (Param::Aperture, 2) => "aperture",
        (Param::HalfAngle, 3) => "half_angle",
        _ => return Err(CliError::Config(format!("this parameter does not apply in dimension {dim}"))),
    };
    let alpha = runner.cfg.operator.alpha;
    let mut w = csv::Writer::from_path(runner.cfg.report_path("sweep", "csv")).map_err(|e| CliError::Output(e.to_string()))?;
    w.write_record([name, "beta_plus", "beta_minus", "threshold_plus", "threshold_minus"])
        .map_err(|e| CliError::Output(e.to_string()))?;
    let mut points = vec![];
    for v in linspace(from, to, steps) {
        runner.cfg.cone = match param {
            Param::Aperture => ConeSpec::sector(v),
            Param::HalfAngle => ConeSpec::cap(v),
        };
        if let Some(issue) = cone_exponents::Validate::validate(&runner.cfg.cone).first() {
            return Err(CliError::Config(format!("{name} {v}: {issue}")));
        }
        let start = Instant::now();
        let (ex, hit) = runner
            .cache
            .get_or_compute(&runner.key())
            .map_err(|e| CliError::Numerical { task: format!("sweep at {name} = {v}"), source: e })?;
        let plus = ex.beta_plus.value;
        let minus = ex.beta_minus.as_ref().map(|m| m.value);
        let t_plus = liouville_threshold(plus, alpha).ok();
        let t_minus = minus.and_then(|m| liouville_threshold(m, alpha).ok());
        let cell = |x: Option<f64>| x.map(|x| format!("{x}")).unwrap_or_default();
        w.write_record([format!("{v}"), format!("{plus}"), cell(minus), cell(t_plus), cell(t_minus)])
            .map_err(|e| CliError::Output(e.to_string()))?;
        println!("{name} {v:.4}: beta+ {plus:.5}  beta- {}", minus.map_or("-".into(), |m| format!("{m:.5}")));
        points.push(json!({ name: v, "exponents": ex, "cache_hit": hit, "seconds": start.elapsed().as_secs_f64() }));
    }
    w.flush().map_err(|e| CliError::Output(e.to_string()))?;
    let json = json!({
        "task": "sweep",
        "param": name,
        "generated_unix": unix_now(),
        "operator": runner.cfg.operator,
        "quadrature": runner.cfg.quadrature,
        "resolution": runner.cfg.resolution,
        "points": points,
    });
    let text = serde_json::to_string_pretty(&json).map_err(|e| CliError::Output(e.to_string()))?;
    std::fs::write(runner.cfg.report_path("sweep", "json"), text).map_err(|e| CliError::Output(e.to_string()))?;
    Ok(true)
}

fn show_cache(path: &Path) -> Result<bool, CliError> {
    if !path.exists() {
        return Err(CliError::Config(format!("no cache at {}", path.display())));
    }
    let cache = ExponentCache::open(path).map_err(|e| CliError::Config(e.to_string()))?;
    println!("{} records in {}", cache.records().len(), path.display());
    for (i, r) in cache.records().iter().enumerate() {
        let k = &r.key;
        let minus = r.exponents.beta_minus.as_ref().map_or("-".to_string(), |m| format!("{:.6}", m.value));
        println!(
            "{i:>4}  {:?} alpha={} lambda=[{}, {}]  N={} {:?}  nodes={} tol={:e}  beta+={:.6} beta-={minus}",
            k.operator.kind,
            k.operator.alpha,
            k.operator.lambda_lower,
            k.operator.lambda_upper,
            k.cone.dimension,
            k.cone.shape,
            k.resolution.nodes,
            k.quadrature.tol,
            r.exponents.beta_plus.value,
        );
    }
    Ok(true)
}
