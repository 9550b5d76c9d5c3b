//! Command-line front end.
//!
//! Every subcommand accepts `--config <file>` plus flags named after the
//! config keys; flags override the file. Exit status is 0 on success, 1 for
//! invalid input and 2 when the numerics fail.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};

use crate::bounds::{spread, BoundReport};
use crate::config::{parse_pairs, ControlKind, ScenarioName, ScenarioSpec};
use crate::error::{Error, Result};
use crate::field::SpectralField;
use crate::operator::OdeOperator;
use crate::optimizer::{greedy_schedule, optimize_horizon, ControlProblem, ControlSolution};
use crate::scenarios::{build_fixed_flow_operator, project_initial, switching_system};
use crate::simulator::{check_energy_identity, simulate, write_field_csv, AdvectionSchedule, LinearSystem, SimOptions, TimeGrid, Trajectory};
use crate::tensors::{CouplingTensors, DEFAULT_ENTRY_BUDGET};
use crate::{fmt_float, ModeSet};

#[derive(Debug, Parser)]
#[command(name = "spectral-mixing", version, about = "Spectral-Galerkin mixing: simulation, optimal stirring and bounds")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build the coupling tensors and write tensors.csv
    Tensors(RunArgs),
    /// Integrate a scenario and write trajectory.csv
    Simulate(RunArgs),
    /// Compute greedy or finite-horizon controls and write solution.csv
    Optimize(RunArgs),
    /// Check the entrywise advection bounds and write bounds.csv
    VerifyBounds(RunArgs),
    /// Switching flow against pure diffusion
    Benchmark(RunArgs),
    /// Residual of the energy identity along a trajectory
    VerifyEnergy(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// key=value file applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    basis: Option<String>,
    #[arg(long = "N", value_name = "N")]
    n: Option<String>,
    #[arg(long = "M", value_name = "M")]
    m: Option<String>,
    #[arg(long)]
    kappa: Option<String>,
    #[arg(long)]
    t_final: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    /// `step` or `modes:m,n=v;m,n=v`
    #[arg(long)]
    initial: Option<String>,
    /// prescribed, greedy or horizon
    #[arg(long)]
    control: Option<String>,
    /// l2 or h1
    #[arg(long)]
    constraint: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    output_dir: Option<String>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    dump_modes: Option<String>,
    /// comma-separated alpha_kl, row-major in (k, l)
    #[arg(long, allow_hyphen_values = true)]
    alpha: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    beta: Option<String>,
    #[arg(long)]
    segments: Option<String>,
    #[arg(long)]
    max_iter: Option<String>,
    #[arg(long)]
    tol: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    #[arg(long)]
    record_every: Option<String>,
    #[arg(long)]
    resample_every: Option<String>,
    /// comma-separated times for field_<t>.csv snapshots
    #[arg(long)]
    field_times: Option<String>,
    #[arg(long)]
    field_grid: Option<String>,
    /// comma-separated N values for the bound growth study
    #[arg(long)]
    growth: Option<String>,
    #[arg(long)]
    energy_tol: Option<String>,
}

impl RunArgs {
    fn flag_pairs(&self) -> Vec<(&'static str, &String)> {
        let all = [
            ("scenario", &self.scenario),
            ("basis", &self.basis),
            ("N", &self.n),
            ("M", &self.m),
            ("kappa", &self.kappa),
            ("t_final", &self.t_final),
            ("dt", &self.dt),
            ("initial", &self.initial),
            ("control", &self.control),
            ("constraint", &self.constraint),
            ("seed", &self.seed),
            ("output_dir", &self.output_dir),
            ("dump_modes", &self.dump_modes),
            ("alpha", &self.alpha),
            ("beta", &self.beta),
            ("segments", &self.segments),
            ("max_iter", &self.max_iter),
            ("tol", &self.tol),
            ("trials", &self.trials),
            ("record_every", &self.record_every),
            ("resample_every", &self.resample_every),
            ("field_times", &self.field_times),
            ("field_grid", &self.field_grid),
            ("growth", &self.growth),
            ("energy_tol", &self.energy_tol),
        ];
        all.into_iter().filter_map(|(k, v)| v.as_ref().map(|v| (k, v))).collect()
    }

    /// Config file pairs, then flags, over the scenario defaults.
    fn spec(&self, fallback: ScenarioName) -> Result<ScenarioSpec> {
        let mut pairs = match &self.config {
            Some(path) => parse_pairs(&fs::read_to_string(path)?)?,
            None => Vec::new(),
        };
        for (k, v) in self.flag_pairs() {
            pairs.push((0, k.to_string(), v.clone()));
        }
        ScenarioSpec::from_pairs(&pairs, fallback).map_err(|e| match e {
            Error::Config { line: 0, msg } => Error::InvalidInput(msg),
            other => other,
        })
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit status. Reports go to `out`, diagnostics to `err`.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            let _ = if code == 0 { write!(out, "{text}") } else { write!(err, "{text}") };
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            if e.is_numerical() {
                2
            } else {
                1
            }
        }
    }
}

fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Tensors(a) => cmd_tensors(&a.spec(ScenarioName::Custom)?, out),
        Command::Simulate(a) => cmd_simulate(&a.spec(ScenarioName::Fixed)?, out),
        Command::Optimize(a) => cmd_optimize(&a.spec(ScenarioName::Custom)?, out),
        Command::VerifyBounds(a) => cmd_verify_bounds(&a.spec(ScenarioName::Custom)?, out),
        Command::Benchmark(a) => cmd_benchmark(&a.spec(ScenarioName::Switching)?, out),
        Command::VerifyEnergy(a) => cmd_verify_energy(&a.spec(ScenarioName::Fixed)?, out),
    }
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    fs::create_dir_all(dir)?;
    Ok(BufWriter::new(File::create(dir.join(name))?))
}

fn tensors_for(spec: &ScenarioSpec) -> Result<CouplingTensors> {
    CouplingTensors::build_for(spec.basis, spec.n, spec.m, DEFAULT_ENTRY_BUDGET)
}

fn operator_for(spec: &ScenarioSpec) -> Result<OdeOperator> {
    OdeOperator::new(Arc::new(tensors_for(spec)?), spec.kappa)
}

fn initial_for(spec: &ScenarioSpec) -> Result<SpectralField> {
    project_initial(&spec.initial.to_condition(), ModeSet::new(spec.basis, spec.n))
}

fn grid_for(spec: &ScenarioSpec) -> Result<TimeGrid> {
    TimeGrid::new(0.0, spec.t_final, spec.dt)
}

fn sim_options(spec: &ScenarioSpec) -> SimOptions {
    SimOptions {
        record_every: spec.record_every,
        ..SimOptions::default()
    }
}

/// A run of the scenario with its prescribed or optimized velocity.
struct Run {
    traj: Trajectory,
    solution: Option<ControlSolution>,
}

fn prescribed_system(spec: &ScenarioSpec) -> Result<LinearSystem> {
    match spec.scenario {
        ScenarioName::Fixed => Ok(build_fixed_flow_operator(spec.n, spec.kappa)?.system()),
        ScenarioName::Switching => switching_system(spec.n, spec.kappa),
        ScenarioName::Custom => {
            let op = operator_for(spec)?;
            let adv = op.advection(&spec.custom_velocity()?)?;
            Ok(LinearSystem::new(op.modes(), spec.kappa, AdvectionSchedule::Constant(adv)))
        }
    }
}

fn horizon_solution(spec: &ScenarioSpec, op: OdeOperator, a0: SpectralField, grid: TimeGrid) -> Result<(ControlProblem, ControlSolution)> {
    let start = crate::optimizer::greedy_instantaneous(&op, &a0, spec.constraint)?;
    let problem = ControlProblem {
        op,
        a0,
        horizon: grid,
        constraint: spec.constraint,
        segments: spec.segments,
    };
    problem.validate()?;
    let init = ControlSolution::constant(&problem, start.vel)?;
    let sol = optimize_horizon(&problem, &init, spec.max_iter, spec.tol)?;
    Ok((problem, sol))
}

fn execute(spec: &ScenarioSpec) -> Result<Run> {
    let a0 = initial_for(spec)?;
    let grid = grid_for(spec)?;
    match spec.control {
        ControlKind::Prescribed => Ok(Run {
            traj: simulate(&prescribed_system(spec)?, a0, &grid, sim_options(spec))?,
            solution: None,
        }),
        ControlKind::Greedy => {
            let op = operator_for(spec)?;
            let (sol, traj, _) = greedy_schedule(&op, a0, &grid, spec.constraint, spec.resample_every)?;
            Ok(Run {
                traj,
                solution: Some(sol),
            })
        }
        ControlKind::Horizon => {
            let op = operator_for(spec)?;
            let (problem, sol) = horizon_solution(spec, op, a0.clone(), grid)?;
            let sys = problem.system(&sol.controls)?;
            Ok(Run {
                traj: simulate(&sys, a0, &grid, sim_options(spec))?,
                solution: Some(sol),
            })
        }
    }
}

fn write_outputs(spec: &ScenarioSpec, run: &Run) -> Result<()> {
    run.traj.write_csv(create(&spec.output_dir, "trajectory.csv")?, spec.dump_modes)?;
    if let Some(sol) = &run.solution {
        sol.write_csv(create(&spec.output_dir, "solution.csv")?)?;
    }
    for &t in &spec.field_times {
        let idx = run
            .traj
            .times
            .iter()
            .position(|s| (s - t).abs() <= 0.5 * spec.dt)
            .ok_or_else(|| Error::InvalidInput(format!("no recorded state at t={t}")))?;
        write_field_csv(&run.traj.states[idx], spec.field_grid, create(&spec.output_dir, &format!("field_{t}.csv"))?)?;
    }
    Ok(())
}

fn summary(out: &mut dyn Write, traj: &Trajectory) -> Result<()> {
    let first = traj.diagnostics[0];
    let last = traj.diagnostics[traj.len() - 1];
    writeln!(out, "t_final={} Q={} norm2={} V={}", fmt_float(*traj.times.last().unwrap()), fmt_float(last.q), fmt_float(last.norm2), fmt_float(last.variance))?;
    writeln!(out, "initial Q={} norm2={} V={}", fmt_float(first.q), fmt_float(first.norm2), fmt_float(first.variance))?;
    Ok(())
}

fn cmd_tensors(spec: &ScenarioSpec, out: &mut dyn Write) -> Result<()> {
    let t = tensors_for(spec)?;
    t.write_csv(create(&spec.output_dir, "tensors.csv")?)?;
    writeln!(
        out,
        "basis={} N={} M={} stored={} slots={} A_fill={}",
        spec.basis,
        spec.n,
        spec.m,
        t.len(),
        t.total_slots(),
        fmt_float(t.a_fill_fraction())
    )?;
    Ok(())
}

fn cmd_simulate(spec: &ScenarioSpec, out: &mut dyn Write) -> Result<()> {
    let run = execute(spec)?;
    write_outputs(spec, &run)?;
    summary(out, &run.traj)
}

fn cmd_optimize(spec: &ScenarioSpec, out: &mut dyn Write) -> Result<()> {
    if spec.control == ControlKind::Prescribed {
        return Err(Error::InvalidInput("optimize needs --control greedy or --control horizon".into()));
    }
    let run = execute(spec)?;
    write_outputs(spec, &run)?;
    let sol = run.solution.as_ref().expect("optimized runs carry a solution");
    writeln!(out, "control={} objective={} iterations={}", spec.control, fmt_float(sol.objective_value), sol.iterations)?;
    summary(out, &run.traj)
}

fn cmd_verify_bounds(spec: &ScenarioSpec, out: &mut dyn Write) -> Result<()> {
    let t = tensors_for(spec)?;
    let report = BoundReport::build(&t, spec.trials, spec.constraint, spec.seed, &spec.growth)?;
    report.write_csv(create(&spec.output_dir, "bounds.csv")?)?;
    writeln!(out, "violations=0 trials={} constraint={}", spec.trials, spec.constraint)?;
    writeln!(out, "K={} K_hat={} observed_max_entry={}", fmt_float(report.k), fmt_float(report.k_hat), fmt_float(report.observed_max_entry))?;
    for s in &report.growth_samples {
        writeln!(out, "growth N={} K={} K_hat={}", s.n, fmt_float(s.k), fmt_float(s.k_hat))?;
    }
    if !report.growth_samples.is_empty() {
        writeln!(
            out,
            "K/N spread={} K_hat spread={}",
            fmt_float(spread(report.growth_samples.iter().map(|s| s.k / s.n as f64))),
            fmt_float(spread(report.growth_samples.iter().map(|s| s.k_hat)))
        )?;
    }
    Ok(())
}

fn cmd_benchmark(spec: &ScenarioSpec, out: &mut dyn Write) -> Result<()> {
    let a0 = initial_for(spec)?;
    let grid = grid_for(spec)?;
    let run = execute(spec)?;
    let diffusion = simulate(&LinearSystem::pure_diffusion(a0.modes(), spec.kappa), a0, &grid, sim_options(spec))?;
    write_outputs(spec, &run)?;
    diffusion.write_csv(create(&spec.output_dir, "trajectory_diffusion.csv")?, spec.dump_modes)?;
    writeln!(out, "t,V_flow,V_diffusion")?;
    let mut t = 0.0;
    while t <= spec.t_final + 1e-12 {
        if let (Some((ts, a)), Some((_, b))) = (run.traj.at_time(t), diffusion.at_time(t)) {
            writeln!(out, "{},{},{}", fmt_float(ts), fmt_float(a.variance), fmt_float(b.variance))?;
        }
        t += 1.0;
    }
    let vf = run.traj.diagnostics.last().unwrap().variance;
    let vd = diffusion.diagnostics.last().unwrap().variance;
    writeln!(out, "enhanced={}", vf < vd)?;
    Ok(())
}

fn cmd_verify_energy(spec: &ScenarioSpec, out: &mut dyn Write) -> Result<()> {
    let run = execute(spec)?;
    let residual = check_energy_identity(&run.traj, spec.kappa)?;
    writeln!(out, "energy_residual={} tolerance={}", fmt_float(residual), fmt_float(spec.energy_tol))?;
    if residual > spec.energy_tol {
        return Err(Error::InvalidInput(format!("energy residual {residual:e} exceeds {:e}", spec.energy_tol)));
    }
    Ok(())
}
