//! `npgi`: solve, baseline, oracle and benchmark runs for Dec-POMDPs with
//! belief-dependent rewards.

mod config;

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde_json::json;

use npgi_core::baselines::{
    best_blind_policy, brute_force_optimal, greedy_open_loop, oracle_tree_count, OpenLoopSearch,
    DEFAULT_OPEN_LOOP_CAP,
};
use npgi_core::model::parse_problem_unchecked;
use npgi_core::policy::{evaluate_with_cap, parse_policy, rollout_estimate, serialize_policy};
use npgi_core::solver::{restart_rng, Termination};
use npgi_core::{serialize_problem, solve, JointPolicy, Mode, Problem, SolveReport};

use config::{Flags, Settings};

#[derive(Parser, Debug)]
#[command(
    name = "npgi",
    version,
    about = "Policy graph improvement for Dec-POMDPs with belief-dependent rewards"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
enum BaselineKind {
    Blind,
    Greedy,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run policy graph improvement with random restarts.
    Solve(Flags),
    /// Evaluate the best blind policy or the best open-loop sequence.
    Baseline {
        #[arg(long, value_enum)]
        kind: BaselineKind,
        #[command(flatten)]
        flags: Flags,
    },
    /// Exhaustive search over joint policy trees.
    Oracle(Flags),
    /// Mean backward-pass durations of both modes across horizons.
    Bench {
        /// Comma-separated horizons.
        #[arg(long, default_value = "2,3,4", value_delimiter = ',')]
        horizons: Vec<usize>,
        #[command(flatten)]
        flags: Flags,
    },
    /// Exact value of a saved policy, optionally cross-checked by simulation.
    Eval {
        policy: PathBuf,
        /// Monte-Carlo episodes; 0 skips simulation.
        #[arg(long, default_value_t = 0)]
        episodes: usize,
        #[command(flatten)]
        flags: Flags,
    },
    /// Parse a problem file and report every model violation.
    Validate { problem: PathBuf },
    /// Write the configured problem in the problem file format.
    Export(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Solve(flags) => cmd_solve(&Settings::resolve(&flags)?),
        Command::Baseline { kind, flags } => cmd_baseline(&Settings::resolve(&flags)?, kind),
        Command::Oracle(flags) => cmd_oracle(&Settings::resolve(&flags)?),
        Command::Bench { horizons, flags } => cmd_bench(&Settings::resolve(&flags)?, &horizons),
        Command::Eval {
            policy,
            episodes,
            flags,
        } => cmd_eval(&Settings::resolve(&flags)?, &policy, episodes),
        Command::Validate { problem } => cmd_validate(&problem),
        Command::Export(flags) => {
            let settings = Settings::resolve(&flags)?;
            print!("{}", serialize_problem(&settings.problem()?));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn problem_summary(problem: &Problem) -> serde_json::Value {
    json!({
        "agents": problem.agent_count,
        "states": problem.state_count,
        "local_actions": problem.local_actions,
        "local_observations": problem.local_observations,
        "horizon": problem.horizon,
    })
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn manifest(
    command: &str,
    settings: &Settings,
    problem: &Problem,
    results: serde_json::Value,
) -> Result<String> {
    let value = json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "settings": settings,
        "problem": problem_summary(problem),
        "results": results,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}

fn secs(d: std::time::Duration) -> String {
    format!("{:.3}", d.as_secs_f64())
}

fn passes_csv(report: &SolveReport) -> String {
    let mut out = String::from("restart,seed,pass,accepted_value,pass_seconds\n");
    for r in &report.restarts {
        for (pass, (v, d)) in r.value_trace.iter().zip(&r.pass_durations).enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{:?},{}",
                r.restart,
                report.seed,
                pass,
                v,
                secs(*d)
            );
        }
    }
    out
}

fn restarts_csv(report: &SolveReport) -> String {
    let mut out = String::from(
        "restart,seed,passes,initial_value,value,converged,timed_out,mean_backward_seconds\n",
    );
    for r in &report.restarts {
        let mean_backward = if r.backward_durations.is_empty() {
            String::new()
        } else {
            let total: f64 = r.backward_durations.iter().map(|d| d.as_secs_f64()).sum();
            format!("{:.3}", total / r.backward_durations.len() as f64)
        };
        let _ = writeln!(
            out,
            "{},{},{},{:?},{:?},{},{},{}",
            r.restart,
            report.seed,
            r.value_trace.len(),
            r.initial_value,
            r.final_value,
            r.converged,
            r.timed_out,
            mean_backward
        );
    }
    out
}

fn cmd_solve(settings: &Settings) -> Result<ExitCode> {
    let problem = settings.problem()?;
    let config = settings.solver_config()?;
    let started = Instant::now();
    let report = solve(&problem, &config)?;
    let elapsed = started.elapsed();
    let termination = match report.termination {
        Termination::Completed => "completed",
        Termination::TimeLimitExceeded => "time_limit_exceeded",
    };
    let results = json!({
        "best_value": report.best_value,
        "mean_value": report.mean_value(),
        "best_restart": report.best_restart,
        "termination": termination,
        "mean_backward_seconds": report.mean_backward_seconds(),
        "wall_seconds": elapsed.as_secs_f64(),
    });
    let out = &settings.out_dir();
    write_file(
        out,
        "manifest.json",
        &manifest("solve", settings, &problem, results)?,
    )?;
    write_file(out, "passes.csv", &passes_csv(&report))?;
    write_file(out, "restarts.csv", &restarts_csv(&report))?;
    write_file(
        out,
        "best_policy.txt",
        &serialize_policy(&report.best_policy),
    )?;

    println!("restarts      {}", report.restarts.len());
    println!("best value    {:.6}", report.best_value);
    println!("mean value    {:.6}", report.mean_value());
    if let Some(b) = report.mean_backward_seconds() {
        println!("mean backward {b:.3}s");
    }
    println!("termination   {termination}");
    println!("artifacts     {}", out.display());
    if report.termination == Termination::TimeLimitExceeded {
        eprintln!("error: time limit exceeded; partial results written");
        return Ok(ExitCode::from(2));
    }
    Ok(ExitCode::SUCCESS)
}

fn action_names(problem: &Problem, joint: usize) -> String {
    let locals = problem.action_space().decode(joint);
    locals
        .iter()
        .enumerate()
        .map(|(i, &a)| {
            problem
                .labels
                .actions
                .get(i)
                .and_then(|l| l.get(a))
                .cloned()
                .unwrap_or_else(|| a.to_string())
        })
        .collect::<Vec<_>>()
        .join("+")
}

fn cmd_baseline(settings: &Settings, kind: BaselineKind) -> Result<ExitCode> {
    let problem = settings.problem()?;
    let (policy, value, actions, label) = match kind {
        BaselineKind::Blind => {
            let (policy, value) = best_blind_policy(&problem)?;
            let joint = policy.joint_action(&problem, 0, &vec![0; problem.agent_count]);
            (policy, value, vec![joint; problem.horizon], "blind")
        }
        BaselineKind::Greedy => {
            let result = greedy_open_loop(&problem, DEFAULT_OPEN_LOOP_CAP)?;
            let label = match result.search {
                OpenLoopSearch::Exhaustive => "open-loop (exhaustive)",
                OpenLoopSearch::Greedy => "open-loop (greedy heuristic)",
            };
            (
                JointPolicy::open_loop(&problem, &result.actions),
                result.value,
                result.actions,
                label,
            )
        }
    };
    let sequence: Vec<String> = actions.iter().map(|&a| action_names(&problem, a)).collect();
    println!("baseline {label}");
    println!("actions  {}", sequence.join(" "));
    println!("value    {value:.6}");
    if let Some(out) = &settings.out {
        let results = json!({ "kind": label, "value": value, "actions": actions });
        write_file(
            out,
            "manifest.json",
            &manifest("baseline", settings, &problem, results)?,
        )?;
        write_file(out, "policy.txt", &serialize_policy(&policy))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_oracle(settings: &Settings) -> Result<ExitCode> {
    let problem = settings.problem()?;
    let count = oracle_tree_count(&problem);
    let (policy, value) = brute_force_optimal(&problem, settings.cap)?;
    println!("joint trees {count}");
    println!("value       {value:.6}");
    if let Some(out) = &settings.out {
        let results = json!({ "value": value, "joint_trees": count.to_string() });
        write_file(
            out,
            "manifest.json",
            &manifest("oracle", settings, &problem, results)?,
        )?;
        write_file(out, "policy.txt", &serialize_policy(&policy))?;
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_bench(settings: &Settings, horizons: &[usize]) -> Result<ExitCode> {
    if horizons.is_empty() {
        bail!("no horizons given");
    }
    let mut csv = String::from("horizon,mode,mean_backward_seconds,mean_value,best_value\n");
    let mut rows = Vec::new();
    println!(
        "{:>3}  {:>12}  {:>12}  {:>8}",
        "T", "exact [s]", "lb [s]", "speedup"
    );
    for &h in horizons {
        let problem = settings.problem_with_horizon(Some(h))?;
        let mut means = Vec::new();
        for mode in [Mode::Exact, Mode::LowerBound] {
            let config = npgi_core::SolverConfig {
                mode,
                ..settings.solver_config()?
            };
            let report = solve(&problem, &config)?;
            let mean = report.mean_backward_seconds().unwrap_or(0.0);
            let _ = writeln!(
                csv,
                "{h},{},{mean:.3},{:?},{:?}",
                mode.name(),
                report.mean_value(),
                report.best_value
            );
            rows.push(json!({
                "horizon": h,
                "mode": mode.name(),
                "mean_backward_seconds": mean,
                "mean_value": report.mean_value(),
                "best_value": report.best_value,
            }));
            means.push(mean);
        }
        let speedup = if means[1] > 0.0 {
            means[0] / means[1]
        } else {
            f64::NAN
        };
        println!(
            "{h:>3}  {:>12.3}  {:>12.3}  {speedup:>8.2}",
            means[0], means[1]
        );
    }
    let problem = settings.problem_with_horizon(Some(horizons[0]))?;
    write_file(&settings.out_dir(), "bench.csv", &csv)?;
    write_file(
        &settings.out_dir(),
        "manifest.json",
        &manifest("bench", settings, &problem, json!(rows))?,
    )?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_eval(settings: &Settings, path: &Path, episodes: usize) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let policy =
        parse_policy(&text).with_context(|| format!("loading policy {}", path.display()))?;
    let horizon = settings.horizon.or(Some(policy.horizon()));
    let problem = settings.problem_with_horizon(horizon)?;
    let value = evaluate_with_cap(&problem, &policy, settings.cap)?;
    println!("value     {value:.6}");
    if episodes > 0 {
        let mut rng = restart_rng(settings.seed, 0);
        let est = rollout_estimate(&problem, &policy, episodes, &mut rng)?;
        println!(
            "simulated {:.6} ± {:.6} ({} episodes)",
            est.mean, est.std_error, est.episodes
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_validate(path: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let problem =
        parse_problem_unchecked(&text).with_context(|| format!("parsing {}", path.display()))?;
    let report = problem.validate();
    if report.is_empty() {
        println!(
            "ok: {} agents, {} states, horizon {}",
            problem.agent_count, problem.state_count, problem.horizon
        );
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{report}");
        Ok(ExitCode::FAILURE)
    }
}
