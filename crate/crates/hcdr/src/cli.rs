//! `hcdr plan | simulate | verify`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hcdr_core::redundancy::{plan, PlanResult};
use hcdr_core::scenario::ControlGains;
use hcdr_core::sim::simulate;
use hcdr_core::{Error, HcdrParams, Method, ScenarioConfig};

use crate::io::{load_params, load_scenario, InputError, Loaded};
use crate::output::{read_plan_csv, write_json, write_plan_csv, write_sim_csv, Manifest, PlanReadError, SimSummary};
use crate::verify::{run_battery, Battery};

pub const EXIT_OK: u8 = 0;
pub const EXIT_PROPERTY: u8 = 1;
pub const EXIT_INPUT: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;
pub const EXIT_VALIDATION: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "hcdr",
    version,
    about = "Plan, simulate and verify the hybrid cable-driven robot"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve the redundancy along a scenario and write plan.csv.
    Plan(PlanArgs),
    /// Replay a plan on the plant and write sim.csv.
    Simulate(SimulateArgs),
    /// Run the invariant battery on a parameter file.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Toaj,
    Toauj,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Toaj => Method::Toaj,
            MethodArg::Toauj => Method::Toauj,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    #[arg(long)]
    pub params: PathBuf,
    /// One or more scenario files. With several, each run writes into a
    /// subdirectory named after the file stem.
    #[arg(long, num_args = 1.., required = true)]
    pub scenario: Vec<PathBuf>,
    /// Overrides the method named in the scenario file.
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub out: PathBuf,
    /// Scenario files planned in parallel.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long)]
    pub scenario: PathBuf,
    /// Plan CSV to replay.
    #[arg(long, conflicts_with = "replan", required_unless_present = "replan")]
    pub plan: Option<PathBuf>,
    /// Plan the scenario first instead of reading a plan file.
    #[arg(long)]
    pub replan: bool,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    /// Feedback on the plant. Follows the scenario file when omitted.
    #[arg(long, value_enum)]
    pub control: Option<Switch>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub params: PathBuf,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

/// A failed command with its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure {
            code,
            message: message.into(),
        }
    }
}

impl From<InputError> for Failure {
    fn from(e: InputError) -> Self {
        Failure::new(EXIT_INPUT, e.to_string())
    }
}

impl From<PlanReadError> for Failure {
    fn from(e: PlanReadError) -> Self {
        Failure::new(EXIT_INPUT, e.to_string())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::new(core_code(&e), e.to_string())
    }
}

fn core_code(e: &Error) -> u8 {
    match e {
        Error::AtStep { source, .. } => core_code(source),
        Error::Invalid { .. } | Error::OutOfRange { .. } => EXIT_VALIDATION,
        _ => EXIT_NUMERIC,
    }
}

fn write_failure(path: &Path) -> impl FnOnce(std::io::Error) -> Failure + '_ {
    move |e| Failure::new(EXIT_INPUT, format!("{}: {e}", path.display()))
}

fn create_dir(path: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(path).map_err(write_failure(path))
}

fn load_inputs(params: &Path, scenario: &Path) -> Result<(Loaded<HcdrParams>, Loaded<ScenarioConfig>), Failure> {
    let p = load_params(params)?;
    let s = load_scenario(scenario)?;
    p.value.validate()?;
    s.value.validate()?;
    Ok((p, s))
}

fn manifest(
    p: &Loaded<HcdrParams>,
    s: &Loaded<ScenarioConfig>,
    start: Instant,
    phases: BTreeMap<String, f64>,
) -> Manifest {
    Manifest {
        command_line: std::env::args().collect(),
        params_sha256: p.sha256.clone(),
        scenario_sha256: s.sha256.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        wall_clock_s: start.elapsed().as_secs_f64(),
        phases_s: phases,
    }
}

fn plan_one(params: &Path, scenario: &Path, method: Option<MethodArg>, out: &Path) -> Result<String, Failure> {
    let start = Instant::now();
    let mut phases = BTreeMap::new();
    let (p, s) = load_inputs(params, scenario)?;
    phases.insert("load".into(), start.elapsed().as_secs_f64());
    let method = method.map(Method::from).unwrap_or(s.value.method);
    let t = Instant::now();
    let result = plan(&p.value, &s.value, method)?;
    phases.insert("plan".into(), t.elapsed().as_secs_f64());
    let t = Instant::now();
    create_dir(out)?;
    let csv_path = out.join("plan.csv");
    write_plan_csv(&csv_path, &result).map_err(write_failure(&csv_path))?;
    phases.insert("write".into(), t.elapsed().as_secs_f64());
    let m = manifest(&p, &s, start, phases);
    let json_path = out.join("manifest.json");
    write_json(&json_path, &m).map_err(write_failure(&json_path))?;
    let last = result.last();
    Ok(format!(
        "{}: {} rows, method {}, final p_e [{:.6}, {:.6}, {:.6}], {} clamped steps, {:.2} s",
        s.value.name,
        result.rows.len(),
        method.name(),
        last.end_effector[0],
        last.end_effector[1],
        last.end_effector[2],
        result.clamped_steps(),
        m.wall_clock_s
    ))
}

fn cmd_plan(a: &PlanArgs) -> Result<Vec<String>, Failure> {
    let target = |f: &PathBuf| -> PathBuf {
        if a.scenario.len() == 1 {
            a.out.clone()
        } else {
            a.out.join(f.file_stem().unwrap_or_default())
        }
    };
    let jobs = a.jobs.max(1);
    let mut results: Vec<Option<Result<String, Failure>>> = (0..a.scenario.len()).map(|_| None).collect();
    let chunk = a.scenario.len().div_ceil(jobs);
    std::thread::scope(|s| {
        for (files, slots) in a.scenario.chunks(chunk).zip(results.chunks_mut(chunk)) {
            s.spawn(move || {
                for (f, slot) in files.iter().zip(slots.iter_mut()) {
                    *slot = Some(plan_one(&a.params, f, a.method, &target(f)));
                }
            });
        }
    });
    results.into_iter().map(|r| r.expect("every scenario ran")).collect()
}

fn cmd_simulate(a: &SimulateArgs) -> Result<Vec<String>, Failure> {
    let start = Instant::now();
    let mut phases = BTreeMap::new();
    let (p, s) = load_inputs(&a.params, &a.scenario)?;
    let method = a.method.map(Method::from).unwrap_or(s.value.method);
    phases.insert("load".into(), start.elapsed().as_secs_f64());
    let t = Instant::now();
    let reference: PlanResult = match &a.plan {
        Some(f) => read_plan_csv(f, method, s.value.sample_time)?,
        None => {
            let r = plan(&p.value, &s.value, method)?;
            phases.insert("plan".into(), t.elapsed().as_secs_f64());
            r
        }
    };
    let control = a.control.map_or(s.value.control_on, |c| c == Switch::On);
    let gains = if control {
        s.value.control.clone()
    } else {
        ControlGains::default()
    };
    let t = Instant::now();
    let trace = simulate(&p.value, &s.value, &reference, &gains)?;
    phases.insert("simulate".into(), t.elapsed().as_secs_f64());

    let t = Instant::now();
    create_dir(&a.out)?;
    let csv_path = a.out.join("sim.csv");
    write_sim_csv(&csv_path, &trace).map_err(write_failure(&csv_path))?;
    let pulse_end = s
        .value
        .plant_pulses()
        .iter()
        .map(|x| x.stop)
        .fold(s.value.t_start, f64::max);
    let e = trace.max_error();
    let summary = SimSummary {
        scenario: s.value.name.clone(),
        method: method.name().into(),
        control,
        samples: trace.len(),
        max_error: [e[0], e[1], e[2]],
        post_pulse_unactuated_peak: trace.unactuated_peak_after(pulse_end),
        final_unactuated_norm: trace.unactuated_final(),
        pulse_end,
    };
    let sum_path = a.out.join("summary.json");
    write_json(&sum_path, &summary).map_err(write_failure(&sum_path))?;
    phases.insert("write".into(), t.elapsed().as_secs_f64());
    let m = manifest(&p, &s, start, phases);
    let man_path = a.out.join("manifest.json");
    write_json(&man_path, &m).map_err(write_failure(&man_path))?;
    Ok(vec![format!(
        "{}: {} samples, control {}, max error [{:.4}, {:.4}, {:.4}] m, {:.2} s",
        summary.scenario,
        summary.samples,
        if summary.control { "on" } else { "off" },
        e[0],
        e[1],
        e[2],
        m.wall_clock_s
    )])
}

fn cmd_verify(a: &VerifyArgs) -> Result<Vec<String>, Failure> {
    let p = load_params(&a.params)?;
    p.value.validate()?;
    let battery = Battery {
        seed: a.seed,
        ..Battery::default()
    };
    let results = run_battery(&p.value, &battery, a.jobs.max(1));
    let mut lines = Vec::new();
    for r in &results {
        let mut line = format!(
            "{} {:<24} worst {:.3e} (tol {:.0e}, {} samples)",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.worst,
            r.tolerance,
            r.samples
        );
        if let Some(d) = &r.detail {
            line.push_str(": ");
            line.push_str(d);
        }
        lines.push(line);
    }
    let failed: Vec<_> = results.iter().filter(|r| !r.passed).map(|r| r.name).collect();
    if failed.is_empty() {
        Ok(lines)
    } else {
        for l in &lines {
            println!("{l}");
        }
        Err(Failure::new(
            EXIT_PROPERTY,
            format!("failed properties: {}", failed.join(", ")),
        ))
    }
}

/// Run a parsed command, printing progress to stdout and the cause of a
/// failure to stderr. Returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    let outcome = match &cli.command {
        Command::Plan(a) => cmd_plan(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match outcome {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            EXIT_OK
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            f.code
        }
    }
}
