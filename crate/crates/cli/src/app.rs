use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, ValueEnum};
use serde::Serialize;

use mfg_crowd::fields::total_mass;
use mfg_crowd::metrics::{barycenter, direction_turn_time, evacuation_time};
use mfg_crowd::scenarios::{builtin_scenario, parse_config};
use mfg_crowd::{Error, Scenario, SimulationResult, Verdict};

use crate::output::{write_convergence_log, write_density_csv, write_pgm};

#[derive(Debug, Parser)]
#[command(name = "mfg-crowd", version, about = "Crowd simulation with limited-horizon mean-field games")]
pub struct Cli {
    #[command(flatten)]
    pub source: Source,
    /// Prediction horizon, overriding the scenario value.
    #[arg(long)]
    pub theta: Option<f64>,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
    /// Frame times, snapped to the nearest time level.
    #[arg(long, value_delimiter = ',')]
    pub frames: Vec<f64>,
    /// Also write every N-th level.
    #[arg(long)]
    pub every: Option<usize>,
    #[arg(long, value_enum)]
    pub fictitious_play: Option<Switch>,
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Accepted for interface stability; the scheme is deterministic.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Built-in scenario: test1 .. test5.
    #[arg(long)]
    pub scenario: Option<String>,
    /// Scenario file in TOML.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Cfl(String),
    Internal(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 3,
            CliError::Cfl(_) => 4,
            CliError::Internal(_) => 5,
            CliError::Io(_) => 6,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) | CliError::Cfl(m) | CliError::Internal(m) | CliError::Io(m) => f.write_str(m),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } => CliError::Config(e.to_string()),
            Error::Cfl { .. } => CliError::Cfl(e.to_string()),
            Error::Internal(_) => CliError::Internal(e.to_string()),
        }
    }
}

fn io_err(path: &Path) -> impl Fn(io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Serialize)]
struct RunInfo {
    status: &'static str,
    source: String,
    theta: f64,
    fictitious_play: bool,
    tol: f64,
    max_iters: usize,
    stagnation_window: usize,
    warm_start: bool,
    parallel: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    wall_clock_s: Option<f64>,
    files: Vec<String>,
}

#[derive(Debug, Serialize)]
struct ExitSummary {
    phase: usize,
    segment: usize,
    mass: f64,
}

#[derive(Debug, Default, Serialize)]
struct Summary {
    steps: usize,
    converged_steps: usize,
    stabilized_steps: usize,
    exhausted_steps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    turn_time: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    evacuation_time_99: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    exits: Vec<ExitSummary>,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    run: RunInfo,
    #[serde(skip_serializing_if = "Option::is_none")]
    summary: Option<Summary>,
    scenario: &'a Scenario,
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let text = toml::to_string(manifest).map_err(|e| CliError::Internal(format!("manifest: {e}")))?;
    let path = dir.join("manifest.toml");
    fs::write(&path, text).map_err(io_err(&path))
}

/// Outcome of a finished run, for callers that want more than the files.
#[derive(Debug)]
pub struct RunOutput {
    pub result: SimulationResult,
    pub files: Vec<PathBuf>,
}

pub fn load_scenario(cli: &Cli) -> Result<Scenario, CliError> {
    let mut scenario = match (&cli.source.scenario, &cli.source.config) {
        (Some(name), _) => builtin_scenario(name)?,
        (None, Some(path)) => {
            let text = fs::read_to_string(path).map_err(io_err(path))?;
            parse_config(&text)?
        }
        (None, None) => return Err(CliError::Config("either --scenario or --config is required".into())),
    };
    if let Some(theta) = cli.theta {
        scenario = scenario.with_theta(theta);
    }
    if let Some(fp) = cli.fictitious_play {
        scenario.solver.fictitious_play = fp == Switch::On;
    }
    if let Some(tol) = cli.tol {
        scenario.solver.tol = Some(tol);
    }
    if let Some(iters) = cli.max_iters {
        scenario.solver.max_iters = iters;
    }
    Ok(scenario)
}

pub fn run(cli: &Cli) -> Result<RunOutput, CliError> {
    let scenario = load_scenario(cli)?;
    let sim = scenario.build()?;
    let g = sim.grid().clone();
    let opts = scenario.solver_options();
    if cli.every == Some(0) {
        return Err(CliError::Config("--every must be >= 1".into()));
    }

    let mut levels: BTreeSet<usize> = cli.frames.iter().map(|&t| g.snap_time(t)).collect();
    if let Some(every) = cli.every {
        levels.extend((0..=g.nt).step_by(every));
    }
    if levels.is_empty() {
        levels.extend([0, g.nt]);
    }

    let dir = &cli.out;
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let source = match (&cli.source.scenario, &cli.source.config) {
        (Some(name), _) => format!("builtin:{name}"),
        (_, Some(path)) => path.display().to_string(),
        _ => unreachable!(),
    };
    let mut info = RunInfo {
        status: "running",
        source,
        theta: scenario.model.theta,
        fictitious_play: opts.use_fictitious_play,
        tol: opts.tol,
        max_iters: opts.max_iters,
        stagnation_window: opts.stagnation_window,
        warm_start: opts.warm_start,
        parallel: sim.model.exec.is_parallel(),
        seed: cli.seed,
        wall_clock_s: None,
        files: vec!["manifest.toml".into()],
    };
    write_manifest(dir, &RunManifest { run: info.clone(), summary: None, scenario: &scenario })?;

    let scale = match sim.rho0.max() {
        m if m > 0.0 => m,
        _ => 1.0,
    };
    let mut files: Vec<String> = Vec::new();
    let mut write_frame = |n: usize, slice: &mfg_crowd::DensityField| -> Result<(), CliError> {
        let csv = format!("frame_{n:06}.csv");
        let pgm = format!("frame_{n:06}.pgm");
        write_density_csv(slice, &g, g.time(n), &dir.join(&csv)).map_err(io_err(&dir.join(&csv)))?;
        write_pgm(slice, &dir.join(&pgm), scale).map_err(io_err(&dir.join(&pgm)))?;
        files.push(csv);
        files.push(pgm);
        Ok(())
    };

    let start = Instant::now();
    if levels.contains(&0) {
        write_frame(0, &sim.rho0)?;
    }
    let mut level = 0;
    let mut failure = None;
    let result = sim.run_observed(|slice, _| {
        level += 1;
        if levels.contains(&level) {
            if let Err(e) = write_frame(level, slice) {
                failure = Some(e);
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    })?;
    if let Some(e) = failure {
        return Err(e);
    }

    let conv_path = dir.join("convergence.csv");
    write_convergence_log(&result.convergence, &conv_path).map_err(io_err(&conv_path))?;
    files.push("convergence.csv".into());
    let metrics_path = dir.join("metrics.csv");
    fs::write(&metrics_path, metrics_csv(&result, &g)).map_err(io_err(&metrics_path))?;
    files.push("metrics.csv".into());

    let count = |v: Verdict| result.convergence.iter().filter(|r| r.verdict == v).count();
    let mass0 = scenario.initial_mass();
    let mut summary = Summary {
        steps: result.convergence.len(),
        converged_steps: count(Verdict::Converged),
        stabilized_steps: count(Verdict::Stabilized),
        exhausted_steps: count(Verdict::Exhausted),
        ..Summary::default()
    };
    if scenario.target.is_some() {
        summary.evacuation_time_99 = evacuation_time(&result.evacuated, mass0, 0.99, &g);
        summary.exits = result
            .exits
            .iter()
            .map(|e| ExitSummary { phase: e.phase, segment: e.segment, mass: e.mass })
            .collect();
    } else {
        summary.turn_time = direction_turn_time(&result.density, &g);
    }

    info.files.extend(files);
    info.status = "complete";
    info.wall_clock_s = Some(start.elapsed().as_secs_f64());
    write_manifest(dir, &RunManifest { run: info, summary: Some(summary), scenario: &scenario })?;
    let listed = fs::read_dir(dir)
        .map_err(io_err(dir))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    Ok(RunOutput { result, files: listed })
}

/// Per level: time, mass in the domain, cumulative evacuated mass, barycenter.
pub fn metrics_csv(result: &SimulationResult, g: &mfg_crowd::Grid) -> String {
    let mut out = String::from("n,t,mass,evacuated,barycenter_x,barycenter_y\n");
    for (n, slice) in result.density.slices.iter().enumerate() {
        let evac = result.evacuated.get(n).copied().unwrap_or(0.0);
        let (bx, by) = match barycenter(slice, g) {
            Some(b) => (b.x.to_string(), b.y.to_string()),
            None => (String::new(), String::new()),
        };
        let _ = writeln!(out, "{n},{},{},{evac},{bx},{by}", g.time(n), total_mass(slice, g));
    }
    out
}
