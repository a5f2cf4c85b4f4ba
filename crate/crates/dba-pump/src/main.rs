use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dba_pump::config::{parse_config, RunConfig};
use dba_pump::observables::RunDiagnostics;
use dba_pump::oracle::{compare_with_redfield, ORACLE_TOL};
use dba_pump::output::{check_writable, oracle_csv, sweep_csv, time_series_csv, write_atomic};
use dba_pump::redfield::propagate_with;
use dba_pump::sweep::{run_sweep, SweepParameter};
use dba_pump::{Error, Result};

/// Spacing (fs) of the exact samples in `oracle-check`.
const ORACLE_SAMPLE_FS: f64 = 5.0;
const TRACE_LIMIT: f64 = 1e-8;
const HERMITICITY_LIMIT: f64 = 1e-10;
const CHARGE_BALANCE_LIMIT: f64 = 1e-8;

#[derive(Parser)]
#[command(name = "dba-pump", version, about = "Transient electron pumping in a donor-bridge-acceptor junction")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Propagate one configuration and write the time series.
    Run(Common),
    /// Scan the bridge LUMO energy over 0.02..0.20 eV.
    SweepBridge(Common),
    /// Scan the bridge reorganization energy over 0..0.16 eV.
    SweepDelta(Common),
    /// Compare Redfield against the exact single-particle dynamics.
    OracleCheck(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Output file; overrides `out` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
}

fn load(c: &Common) -> Result<(RunConfig, PathBuf)> {
    let text = std::fs::read_to_string(&c.config).map_err(|source| Error::Io {
        path: c.config.display().to_string(),
        source,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(j) = c.jobs {
        cfg.jobs = j;
    }
    let out = c
        .out
        .clone()
        .or_else(|| cfg.out.as_ref().map(PathBuf::from))
        .ok_or_else(|| Error::Configuration("no output path: pass --out or set `out` in the config".into()))?;
    check_writable(&out)?;
    Ok((cfg, out))
}

/// Hard failures of a completed run; positivity and the decay floor only warn.
fn diagnostic_failures(d: &RunDiagnostics) -> Vec<String> {
    let mut f = Vec::new();
    if !d.recurrence_free {
        f.push("lead chains too short for the window (recurrences)".to_string());
    }
    if d.max_trace_drift >= TRACE_LIMIT {
        f.push(format!("trace drift {:e}", d.max_trace_drift));
    }
    if d.max_hermiticity_drift >= HERMITICITY_LIMIT {
        f.push(format!("Hermiticity drift {:e}", d.max_hermiticity_drift));
    }
    if d.max_charge_balance_error >= CHARGE_BALANCE_LIMIT {
        f.push(format!("charge-balance residual {:e}", d.max_charge_balance_error));
    }
    f
}

fn warnings(d: &RunDiagnostics) {
    if !d.decay_floor_met {
        eprintln!("warning: currents have not decayed to the floor by t = {} fs", d.t_final);
    }
    if !d.positivity_ok() {
        eprintln!("warning: density matrix eigenvalue reached {:e}", d.min_eigenvalue);
    }
}

fn report(out: &Path, failures: &[String]) -> ExitCode {
    println!("wrote {}", out.display());
    for f in failures {
        eprintln!("fail: {f}");
    }
    if failures.is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run(c) => {
            let (cfg, out) = load(&c)?;
            let model = cfg.model()?;
            let rec = propagate_with(&model, &model.space()?, cfg.settings().propagation())?;
            write_atomic(&out, &time_series_csv(&rec, &cfg))?;
            println!("Q_L = {:.6}  Q_R = {:.6}", rec.q_l, rec.q_r);
            warnings(&rec.diagnostics);
            Ok(report(&out, &diagnostic_failures(&rec.diagnostics)))
        }
        Command::SweepBridge(c) => sweep(c, SweepParameter::BridgeLumo),
        Command::SweepDelta(c) => sweep(c, SweepParameter::Reorganization),
        Command::OracleCheck(c) => {
            let (cfg, out) = load(&c)?;
            let model = cfg.model()?;
            let settings = cfg.settings().propagation();
            let spacing = settings.dt * settings.record_every as f64;
            let every = ((ORACLE_SAMPLE_FS / spacing).round() as usize).max(1);
            let cmp = compare_with_redfield(&model, settings, every, ORACLE_TOL)?;
            write_atomic(&out, &oracle_csv(&cmp, &cfg))?;
            let verdict = if cmp.passed() { "pass" } else { "fail" };
            println!(
                "oracle-check {verdict}: Q_L {:.6} vs {:.6} ({:.2}%), Q_R {:.6} vs {:.6} ({:.2}%), tolerance {:.0}%",
                cmp.redfield_q[0],
                cmp.exact_q[0],
                100.0 * cmp.rel[0],
                cmp.redfield_q[1],
                cmp.exact_q[1],
                100.0 * cmp.rel[1],
                100.0 * cmp.tolerance
            );
            let mut failures = diagnostic_failures(&cmp.diagnostics);
            if !cmp.passed() {
                failures.push("accumulated charges differ beyond tolerance".into());
            }
            Ok(report(&out, &failures))
        }
    }
}

fn sweep(c: Common, parameter: SweepParameter) -> Result<ExitCode> {
    let (cfg, out) = load(&c)?;
    let plan = cfg.sweep_plan(parameter)?;
    let result = run_sweep(&plan)?;
    write_atomic(&out, &sweep_csv(&result, &plan, &cfg, None))?;
    let mut failures = Vec::new();
    for p in &result.points {
        match &p.error {
            Some(e) => failures.push(format!("{} = {}: {e}", parameter.name(), p.value)),
            None => {
                println!("{} = {:<6} Q_L = {:.6}  Q_R = {:.6}", parameter.name(), p.value, p.q_l, p.q_r);
                failures.extend(
                    diagnostic_failures(&p.diagnostics)
                        .into_iter()
                        .map(|f| format!("{} = {}: {f}", parameter.name(), p.value)),
                );
            }
        }
    }
    Ok(report(&out, &failures))
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
