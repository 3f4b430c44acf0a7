//! `arto`: runs scenarios, envelope sweeps, the integrator study and the
//! self-test suite.
//!
//! Exit codes: 0 success, 1 experiment failure, 2 usage or config error.

mod check;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use arto::config::{Config, ScenarioFile, KEYS, SCENARIO_KEYS};
use arto::experiments::{envelope_svg, sweep, write_envelope_csv, Disturbance, EnvelopePoint};
use arto::lip::{integration_error_table, max_error, write_error_csv, LipParams, STUDY_CASES};
use arto::orchestrator::{run, write_trace_csv, PlannerKind, RunOutcome, StepSummary};
use clap::{value_parser, Arg, ArgMatches, Command};

/// Directory searched for `default.conf` when `--config` is not given.
const CONFIG_DIR_VAR: &str = "ARTO_CONFIG_DIR";

/// Marks failures that should exit with 1 rather than 2.
#[derive(Debug)]
struct ExperimentFailure(String);

impl std::fmt::Display for ExperimentFailure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ExperimentFailure {}

fn cli() -> Command {
    let defaults = Config::default();
    let mut cmd = Command::new("arto")
        .about("Asynchronous footstep position and timing optimization for LIP walking")
        .subcommand_required(true)
        .arg_required_else_help(true)
        .arg(
            Arg::new("config")
                .long("config")
                .global(true)
                .value_parser(value_parser!(PathBuf))
                .help(format!(
                    "config file (default: ${CONFIG_DIR_VAR}/default.conf if set, else built-in defaults)"
                )),
        )
        .arg(
            Arg::new("out")
                .long("out")
                .global(true)
                .value_parser(value_parser!(PathBuf))
                .default_value("out")
                .help("output directory"),
        )
        .subcommand(
            Command::new("run")
                .about("Runs one scenario and writes trace.csv and steps.csv")
                .arg(
                    Arg::new("scenario")
                        .long("scenario")
                        .value_parser(value_parser!(PathBuf))
                        .help("scenario file (default: 10 s from rest with reference (0.1, 0))"),
                )
                .arg(
                    Arg::new("planner")
                        .long("planner")
                        .value_parser(value_parser!(PlannerKind))
                        .help("overrides the scenario's planner: arto, rk4 or baseline"),
                )
                .after_help(scenario_help()),
        )
        .subcommand(
            Command::new("sweep-push").about("Maximum push envelope; writes envelope_push.csv/.svg"),
        )
        .subcommand(
            Command::new("sweep-vel")
                .about("Maximum velocity-change envelope; writes envelope_vel.csv/.svg"),
        )
        .subcommand(
            Command::new("integrator-error")
                .about("Integrator accuracy study; writes integrator_error.csv"),
        )
        .subcommand(
            Command::new("check").about("Gradient, integrator and trajectory self-tests"),
        )
        .subcommand(
            Command::new("config")
                .about("Prints the effective configuration in config-file syntax"),
        );
    for (key, help) in KEYS {
        let value = defaults.get(key).expect("every key has a default");
        let mut arg = Arg::new(*key)
            .long(key.replace('_', "-"))
            .global(true)
            .value_name("VALUE")
            .help_heading("Config keys (flag overrides the key of the same name)")
            .help(format!("{key}: {help} [default: {value}]"));
        if key.contains('_') {
            arg = arg.alias(*key);
        }
        cmd = cmd.arg(arg);
    }
    cmd
}

fn scenario_help() -> String {
    let mut s = String::from("Scenario file keys:\n");
    for (k, h) in SCENARIO_KEYS {
        s.push_str(&format!("  {k:<10} {h}\n"));
    }
    s
}

fn config_path(m: &ArgMatches) -> Option<PathBuf> {
    m.get_one::<PathBuf>("config")
        .cloned()
        .or_else(|| std::env::var_os(CONFIG_DIR_VAR).map(|d| PathBuf::from(d).join("default.conf")))
}

fn load_config(m: &ArgMatches) -> Result<Config> {
    let mut cfg = match config_path(m) {
        Some(path) => {
            if !path.is_file() {
                bail!("config file not found: {}", path.display());
            }
            Config::load(&path)?
        }
        None => Config::default(),
    };
    for (key, _) in KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v)
                .with_context(|| format!("--{}", key.replace('_', "-")))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn write_steps<W: Write>(steps: &[StepSummary], mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "index,time_s,duration_s,foot_x,foot_y,com_x,com_y,com_vx,com_vy"
    )?;
    for s in steps {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            s.index, s.time, s.duration, s.foot.x, s.foot.y, s.com.x, s.com.y, s.com.vx, s.com.vy
        )?;
    }
    out.flush()
}

fn summarize(out: &RunOutcome) {
    println!("steps: {}", out.steps.len());
    for src in ["rk4", "gd", "baseline"] {
        let n = out
            .accepted
            .iter()
            .filter(|a| a.source.name() == src)
            .count();
        if n > 0 {
            println!("accepted {src}: {n}");
        }
    }
    if let Some(w) = &out.worker_failure {
        println!("worker failure: {w}");
    }
    match out.fall {
        Some((t, reason)) => println!("fell at {t:.3} s ({reason})"),
        None => println!("no fall"),
    }
}

fn cmd_run(cfg: &Config, m: &ArgMatches, dir: &Path) -> Result<()> {
    let half_width = cfg.experiment.half_width;
    let mut file = match m.get_one::<PathBuf>("scenario") {
        Some(p) => ScenarioFile::load(p, half_width)?,
        None => ScenarioFile::parse("reference = 0 0.1 0", half_width)?,
    };
    if let Some(p) = m.get_one::<PlannerKind>("planner") {
        file.scenario.planner = *p;
    }
    let out = run(&file.scenario, &cfg.experiment.run)?;
    write_trace_csv(&out.trace, create(dir, "trace.csv")?)?;
    write_steps(&out.steps, create(dir, "steps.csv")?)?;
    summarize(&out);
    if file.must_pass && (out.fall.is_some() || out.worker_failure.is_some()) {
        return Err(ExperimentFailure("must-pass scenario failed".into()).into());
    }
    Ok(())
}

fn print_envelope(points: &[EnvelopePoint], kind: Disturbance) {
    for p in points {
        let flag = if p.floor_failed {
            " (zero disturbance failed)"
        } else {
            ""
        };
        println!(
            "{:<9} {:>7.4} rad  {:>8.2} {}{flag}",
            p.planner,
            p.angle,
            p.max,
            kind.units()
        );
    }
}

fn cmd_sweep(cfg: &Config, kind: Disturbance, dir: &Path) -> Result<()> {
    let (spec, tag, title) = match kind {
        Disturbance::Push => (&cfg.push_sweep, "push", "Maximum push force"),
        Disturbance::Velocity => (&cfg.velocity_sweep, "vel", "Maximum velocity change"),
    };
    let points = sweep(kind, spec, &cfg.experiment)?;
    let mut csv = create(dir, &format!("envelope_{tag}.csv"))?;
    write_envelope_csv(&points, kind, &mut csv)?;
    csv.flush()?;
    fs::write(
        dir.join(format!("envelope_{tag}.svg")),
        envelope_svg(&points, kind, title),
    )?;
    print_envelope(&points, kind);
    if points.iter().any(|p| p.floor_failed) {
        return Err(ExperimentFailure("a zero-disturbance run failed".into()).into());
    }
    Ok(())
}

fn cmd_integrator(cfg: &Config, dir: &Path) -> Result<()> {
    let s = &cfg.study;
    let params = LipParams::new(cfg.experiment.run.planner.problem.lip.g(), s.h)?;
    let rows = integration_error_table(&params, s.initial_offset, s.horizon, s.resolution)?;
    let mut csv = create(dir, "integrator_error.csv")?;
    write_error_csv(&rows, &mut csv)?;
    csv.flush()?;
    for (method, substeps) in STUDY_CASES {
        println!(
            "{method}({substeps}): max |x error| {:.3e} m",
            max_error(&rows, method, substeps)
        );
    }
    Ok(())
}

fn cmd_check(cfg: &Config) -> Result<()> {
    let results = check::run_all(cfg);
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", r.name, r.detail);
    }
    if results.iter().any(|r| !r.passed) {
        return Err(ExperimentFailure("self-test failed".into()).into());
    }
    Ok(())
}

fn dispatch(m: &ArgMatches) -> Result<()> {
    let (name, sub) = m.subcommand().expect("subcommand is required");
    let cfg = load_config(sub)?;
    let dir = sub.get_one::<PathBuf>("out").expect("has a default");
    let needs_dir = !matches!(name, "check" | "config");
    if needs_dir {
        fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    }
    match name {
        "run" => cmd_run(&cfg, sub, dir),
        "sweep-push" => cmd_sweep(&cfg, Disturbance::Push, dir),
        "sweep-vel" => cmd_sweep(&cfg, Disturbance::Velocity, dir),
        "integrator-error" => cmd_integrator(&cfg, dir),
        "check" => cmd_check(&cfg),
        "config" => {
            print!("{}", cfg.dump());
            Ok(())
        }
        other => unreachable!("unhandled subcommand {other}"),
    }
}

fn main() -> ExitCode {
    let m = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match dispatch(&m) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<ExperimentFailure>() => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn command_definition_is_consistent() {
        cli().debug_assert();
    }

    #[test]
    fn flags_override_config_keys() {
        let m = cli()
            .try_get_matches_from(["arto", "check", "--t-lower", "0.25", "--seed=7"])
            .unwrap();
        let (_, sub) = m.subcommand().unwrap();
        let cfg = load_config(sub).unwrap();
        assert_eq!(cfg.experiment.run.planner.problem.constraints.t_lower, 0.25);
        assert_eq!(cfg.seed, 7);
    }
}
