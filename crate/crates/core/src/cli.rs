//! Command-line driver: `run`, `sweep`, `converge` and `verify`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use crate::acceptance::{self, AcceptanceOptions};
use crate::config::{load_config, ConfigError, ConvergeSection, RunConfig, SweepSection};
use crate::diagnostics::{fit_dissipative, NormSeries};
use crate::experiments::{
    classify_run, convergence_study, run_cell, sweep, temporal_study, ConvergenceReport, RegimeMap, SweepSetup,
};
use crate::grid::MIN_CELLS;
use crate::stepper::RunOutcome;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY_FAILED: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "convdiss",
    version,
    about = "Dissipative PDEs with convective terms: runs, regime sweeps, convergence studies"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides `out` in the config).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Override the grid size.
    #[arg(long = "n-cells", global = true)]
    pub n_cells: Option<usize>,
    /// Override the final time.
    #[arg(long = "t-max", global = true)]
    pub t_max: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Integrate one configuration; writes series.csv and summary.json.
    Run,
    /// Sweep the (p, q, amplitude) lattice; writes regime_map.csv and summary.json.
    Sweep,
    /// Manufactured-solution convergence study; writes orders.csv and summary.json.
    Converge,
    /// Run the acceptance suite; exits 1 if any criterion fails.
    Verify,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        match e {
            ConfigError::Io { .. } => Failure::Runtime(e.to_string()),
            _ => Failure::Config(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Runtime(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| io_failure(path, e))
}

fn make_dir(path: &Path) -> Result<(), Failure> {
    fs::create_dir_all(path).map_err(|e| io_failure(path, e))
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        Failure::Runtime(e.to_string())
    }
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(Failure::Config(m)) => {
            eprintln!("error: {m}");
            EXIT_CONFIG
        }
        Err(Failure::Runtime(m)) => {
            eprintln!("error: {m}");
            EXIT_RUNTIME
        }
    }
}

fn execute(cli: &Cli) -> Result<i32, Failure> {
    if cli.jobs == 0 {
        return Err(Failure::Config("--jobs must be at least 1".into()));
    }
    if cli.command == Command::Verify {
        return verify(cli);
    }
    let path = cli.config.as_ref().ok_or_else(|| Failure::Config("--config <path> is required".into()))?;
    let mut config = load_config(path)?;
    apply_overrides(&mut config, cli)?;
    for w in config.warnings() {
        eprintln!("warning: {w}");
    }
    let out = output_dir(cli, &config);
    make_dir(&out)?;
    match cli.command {
        Command::Run => cmd_run(&config, &out),
        Command::Sweep => cmd_sweep(&config, &out, cli.jobs),
        Command::Converge => cmd_converge(&config, &out),
        Command::Verify => unreachable!("handled above"),
    }
}

fn apply_overrides(config: &mut RunConfig, cli: &Cli) -> Result<(), Failure> {
    if let Some(n) = cli.n_cells {
        if n < MIN_CELLS {
            return Err(Failure::Config(format!("--n-cells must be at least {MIN_CELLS}")));
        }
        config.n_cells = n;
    }
    if let Some(t) = cli.t_max {
        if !(t > 0.0 && t.is_finite()) {
            return Err(Failure::Config("--t-max must be positive".into()));
        }
        config.controls.t_max = t;
    }
    config.validate()?;
    Ok(())
}

fn output_dir(cli: &Cli, config: &RunConfig) -> PathBuf {
    cli.out.clone().or_else(|| config.out.as_ref().map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("out"))
}

/// Fixed 17 significant digits.
pub fn fmt_num(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn series_csv(series: &NormSeries) -> String {
    let mut s = String::from("t");
    for n in &series.names {
        s.push(',');
        s.push_str(n);
    }
    s.push('\n');
    for (i, t) in series.times.iter().enumerate() {
        s.push_str(&fmt_num(*t));
        for c in &series.columns {
            s.push(',');
            s.push_str(&fmt_num(c[i]));
        }
        s.push('\n');
    }
    s
}

pub fn regime_map_csv(map: &RegimeMap) -> String {
    let mut s = String::from("p,q,amplitude,regime,t_detect_or_bound,n_cells\n");
    for c in &map.cells {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{}",
            fmt_num(c.p),
            fmt_num(c.q),
            fmt_num(c.amplitude),
            c.regime.name(),
            fmt_num(c.t_detect_or_bound),
            c.n_cells
        );
    }
    s
}

pub fn orders_csv(reports: &[(&str, &ConvergenceReport)]) -> String {
    let mut s = String::from("study,model,scheme,n_cells,dt,error,fitted_order\n");
    for (study, r) in reports {
        let order = r.order.map(fmt_num).unwrap_or_else(|| "nan".into());
        let rows = r.errors.len();
        for i in 0..rows {
            let n = if r.resolutions.len() == rows { r.resolutions[i] } else { r.resolutions[0] };
            let dt = r.steps.get(i).copied().map(fmt_num).unwrap_or_default();
            let _ =
                writeln!(s, "{study},{},{},{n},{dt},{},{order}", r.model.name(), r.scheme.name(), fmt_num(r.errors[i]));
        }
    }
    s
}

fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        Value::Null
    }
}

pub fn outcome_summary(outcome: &RunOutcome) -> Value {
    let regime = classify_run(outcome);
    let series = outcome.series();
    let mut v = json!({
        "outcome": outcome.label(),
        "regime": regime.name(),
        "samples": series.len(),
        "t_final": series.times.last().copied().map(num).unwrap_or(Value::Null),
        "final_sup_norm": series.last("Linf").map(num).unwrap_or(Value::Null),
    });
    match outcome {
        RunOutcome::BlowUp { t_detect, t_est, reason, .. } => {
            v["t_detect"] = num(*t_detect);
            v["t_est"] = t_est.map(num).unwrap_or(Value::Null);
            v["reason"] = json!(reason.name());
        }
        RunOutcome::Inconclusive { note, .. } => v["note"] = json!(note),
        RunOutcome::Completed { .. } => {
            v["fit"] = match fit_dissipative(series, "L2") {
                Ok(f) => json!({
                    "key": "L2",
                    "decay_rate": num(f.decay_rate),
                    "asymptotic_bound": num(f.asymptotic_bound),
                    "residual": num(f.residual),
                }),
                Err(e) => json!({ "error": e.to_string() }),
            };
        }
    }
    v
}

fn write_json(path: &Path, v: &Value) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(v).map_err(|e| Failure::Runtime(e.to_string()))?;
    text.push('\n');
    write_file(path, text)?;
    Ok(())
}

fn cmd_run(config: &RunConfig, out: &Path) -> Result<i32, Failure> {
    let profile = config.profile()?;
    let outcome = run_cell(&config.spec(), &profile, config.n_cells, &config.controls, &config.diagnostics_config())?;
    write_file(&out.join("series.csv"), series_csv(outcome.series()))?;
    let mut summary = outcome_summary(&outcome);
    summary["model"] = json!(config.model.name());
    summary["n_cells"] = json!(config.n_cells);
    summary["warnings"] = json!(config.warnings());
    write_json(&out.join("summary.json"), &summary)?;
    println!("{}: {}", config.model.name(), outcome.label());
    Ok(EXIT_OK)
}

fn cmd_sweep(config: &RunConfig, out: &Path, jobs: usize) -> Result<i32, Failure> {
    let axes = config.sweep.clone().unwrap_or_default();
    let SweepSection { p_values, q_values, amplitudes } = axes;
    let setup = SweepSetup {
        template: config.spec(),
        p_values,
        q_values,
        amplitude_values: amplitudes,
        n_cells: config.n_cells,
        controls: config.controls.clone(),
        diagnostics: config.diagnostics_config(),
        jobs,
    };
    let map = sweep(&setup)?;
    write_file(&out.join("regime_map.csv"), regime_map_csv(&map))?;
    let count = |name: &str| map.cells.iter().filter(|c| c.regime.name() == name).count();
    let summary = json!({
        "model": config.model.name(),
        "cells": map.cells.len(),
        "dissipative": count("dissipative"),
        "blow_up": count("blow_up"),
        "inconclusive": count("inconclusive"),
        "n_cells": config.n_cells,
    });
    write_json(&out.join("summary.json"), &summary)?;
    println!("{} cells written to {}", map.cells.len(), out.join("regime_map.csv").display());
    Ok(EXIT_OK)
}

fn cmd_converge(config: &RunConfig, out: &Path) -> Result<i32, Failure> {
    let section = config.converge.clone().unwrap_or_default();
    let spec = config.spec();
    let exact = section.exact(config.model);
    let ConvergeSection { resolutions, dts, dt_ref, temporal_n_cells, .. } = section;
    let space = convergence_study(&spec, &exact, &resolutions, &config.controls)?;
    let mut reports: Vec<(&str, ConvergenceReport)> = vec![("space", space)];
    if !dts.is_empty() {
        reports.push(("time", temporal_study(&spec, &exact, temporal_n_cells, &dts, dt_ref, &config.controls)?));
    }
    let refs: Vec<(&str, &ConvergenceReport)> = reports.iter().map(|(s, r)| (*s, r)).collect();
    write_file(&out.join("orders.csv"), orders_csv(&refs))?;
    let studies: Vec<Value> = reports
        .iter()
        .map(|(s, r)| json!({ "study": s, "errors": r.errors, "fitted_order": r.order.map(num) }))
        .collect();
    write_json(&out.join("summary.json"), &json!({ "model": config.model.name(), "studies": studies }))?;
    for (s, r) in &reports {
        println!("{s}: fitted order {}", r.order.map(|o| format!("{o:.3}")).unwrap_or_else(|| "n/a".into()));
    }
    Ok(EXIT_OK)
}

fn verify(cli: &Cli) -> Result<i32, Failure> {
    let mut opts = AcceptanceOptions { jobs: cli.jobs, ..AcceptanceOptions::default() };
    if let Some(n) = cli.n_cells {
        if n < 128 {
            return Err(Failure::Config("--n-cells for verify must be at least 128".into()));
        }
        opts.n_cells = n;
    }
    let results = acceptance::run_all(&opts);
    let mut report = String::new();
    for r in &results {
        let line = r.line();
        println!("{line}");
        report.push_str(&line);
        report.push('\n');
    }
    let passed = results.iter().filter(|r| r.passed).count();
    println!("{passed}/{} criteria passed", results.len());
    if let Some(out) = cli.out.as_ref() {
        make_dir(out)?;
        write_file(&out.join("acceptance.txt"), &report)?;
        let rows: Vec<Value> = results
            .iter()
            .map(|r| json!({ "id": r.id, "name": r.name, "passed": r.passed, "detail": r.detail }))
            .collect();
        write_json(&out.join("summary.json"), &json!({ "passed": passed, "total": results.len(), "criteria": rows }))?;
    }
    Ok(if passed == results.len() { EXIT_OK } else { EXIT_VERIFY_FAILED })
}
