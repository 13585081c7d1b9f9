//! Command-line front end: single runs, parameter sweeps, the verification
//! battery and the baseline failure demonstrations.
//!
//! Exit codes are stable and scripts may rely on them:
//!
//! * 0 — success (no violation, all checks passed)
//! * 1 — the population left the allowed interval during a run
//! * 2 — configuration or I/O error
//! * 3 — the adversary strategy exceeded its budget (aborted run)
//! * 4 — a verification check failed or was inconclusive

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use popstab::analysis::{check_lemmas, summarize_run, CheckScope, LemmaTolerances};
use popstab::adversary::StrategyKind;
use popstab::config::{Config, ConfigError};
use popstab::engine::{run_simulation, EngineError, ProtocolKind, RunConfig, RunRecord};
use popstab::output;
use popstab::protocol::Mutation;
use popstab::verify::{run_battery, VerifyConfig};
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_OK: u8 = 0;
const EXIT_VIOLATION: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BUDGET: u8 = 3;
const EXIT_VERIFY: u8 = 4;

#[derive(Parser)]
#[command(
    name = "popstab",
    about = "Deterministic simulator of a population-stability protocol under a budgeted adversary",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonArgs {
    /// Flat key-value config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed(s) to run; overrides the config seed. Repeatable.
    #[arg(long)]
    seed: Vec<u64>,
    /// Output directory for artifacts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Config override KEY=VALUE, applied after the file. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    /// Total rounds to run (mutually exclusive with --epochs).
    #[arg(long, conflicts_with = "epochs")]
    rounds: Option<u64>,
    /// Whole epochs to run (mutually exclusive with --rounds).
    #[arg(long)]
    epochs: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Run one simulation per seed; write trajectory CSV and summary JSON.
    Run(CommonArgs),
    /// Run a grid of configurations; write per-run and aggregate CSVs.
    Sweep {
        #[command(flatten)]
        common: CommonArgs,
        /// Grid axis KEY=V1,V2,... over adversary, adversary_budget, gamma,
        /// alpha or n_target. Repeatable; axes combine as a product.
        #[arg(long = "grid", value_name = "KEY=V1,V2,...")]
        grid: Vec<String>,
    },
    /// Run the frozen verification battery; exit 4 on any failure.
    Verify {
        #[command(flatten)]
        common: CommonArgs,
        /// Reduced smoke battery (still detects the reference mutants).
        #[arg(long)]
        quick: bool,
    },
    /// Demonstrate the baseline protocols' failure modes side by side.
    Baselines(CommonArgs),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    if let Ok(threads) = std::env::var("POPSTAB_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n >= 1 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("could not apply POPSTAB_THREADS={threads}: {e}");
                }
            }
            _ => log::warn!("ignoring invalid POPSTAB_THREADS={threads}"),
        }
    }
    let cli = Cli::parse();
    let code = match &cli.command {
        Command::Run(common) => cmd_run(common),
        Command::Sweep { common, grid } => cmd_sweep(common, grid),
        Command::Verify { common, quick } => cmd_verify(common, *quick),
        Command::Baselines(common) => cmd_baselines(common),
    };
    match code {
        Ok(c) => ExitCode::from(c),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

/// Build the resolved config map from file + overrides + round flags.
fn load_config(common: &CommonArgs) -> Result<Config, ConfigError> {
    let mut cfg = match &common.config {
        Some(path) => Config::from_file(path)?,
        None => Config::default(),
    };
    for kv in &common.set {
        let Some((k, v)) = kv.split_once('=') else {
            return Err(ConfigError::Parse {
                line: 0,
                message: format!("--set expects KEY=VALUE, got '{kv}'"),
            });
        };
        cfg.set(k.trim(), v.trim())?;
    }
    if let Some(r) = common.rounds {
        cfg.set("max_rounds", &r.to_string())?;
    }
    if let Some(e) = common.epochs {
        cfg.set("epochs", &e.to_string())?;
    }
    Ok(cfg)
}

fn seeds_for(common: &CommonArgs, cfg: &RunConfig) -> Vec<u64> {
    if common.seed.is_empty() {
        vec![cfg.seed]
    } else {
        common.seed.clone()
    }
}

/// Outcome of one simulation run, reduced to what exit codes and sweep
/// aggregation need.
struct RunStatus {
    seed: u64,
    violated: bool,
    first_violation_round: Option<u64>,
    budget_exceeded: bool,
    mean_abs_epoch_drift: Option<f64>,
}

fn write_run_artifacts(
    dir: &Path,
    cfg: &RunConfig,
    record: &RunRecord,
    wall: f64,
) -> anyhow::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut traj = std::io::BufWriter::new(std::fs::File::create(dir.join("trajectory.csv"))?);
    output::write_trajectory_csv(&mut traj, cfg, &record.outcomes)?;
    let summary = output::run_summary_json(cfg, record, wall);
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    if cfg.protocol == ProtocolKind::Main {
        let summaries = summarize_run(record, &cfg.params);
        let mut ep = std::io::BufWriter::new(std::fs::File::create(dir.join("epochs.csv"))?);
        output::write_epoch_summaries_csv(&mut ep, cfg, &summaries)?;
        let report = check_lemmas(
            &record.outcomes,
            &summaries,
            &cfg.params,
            &LemmaTolerances::default(),
            CheckScope {
                null_adversary: cfg.strategy == StrategyKind::Null,
            },
        );
        std::fs::write(
            dir.join("lemma_report.json"),
            serde_json::to_string_pretty(&output::lemma_report_json(cfg, &report))?,
        )?;
    }
    Ok(())
}

fn execute_one(mut cfg: RunConfig, seed: u64, dir: &Path) -> anyhow::Result<RunStatus> {
    cfg.seed = seed;
    let start = Instant::now();
    match run_simulation(&cfg) {
        Ok(record) => {
            let wall = start.elapsed().as_secs_f64();
            write_run_artifacts(dir, &cfg, &record, wall)?;
            let mean_abs = if cfg.protocol == ProtocolKind::Main {
                let summaries = summarize_run(&record, &cfg.params);
                let complete: Vec<_> = summaries.iter().filter(|s| s.complete).collect();
                (!complete.is_empty()).then(|| {
                    complete.iter().map(|s| s.drift.unsigned_abs() as f64).sum::<f64>()
                        / complete.len() as f64
                })
            } else {
                None
            };
            Ok(RunStatus {
                seed,
                violated: record.first_violation_round.is_some(),
                first_violation_round: record.first_violation_round,
                budget_exceeded: false,
                mean_abs_epoch_drift: mean_abs,
            })
        }
        Err(EngineError::BudgetExceeded { round, returned, budget }) => {
            log::error!(
                "seed {seed}: adversary budget exceeded in round {round} ({returned} > {budget})"
            );
            Ok(RunStatus {
                seed,
                violated: false,
                first_violation_round: None,
                budget_exceeded: true,
                mean_abs_epoch_drift: None,
            })
        }
        Err(e @ EngineError::UnsupportedStrategy { .. }) => Err(e.into()),
    }
}

fn cmd_run(common: &CommonArgs) -> anyhow::Result<u8> {
    let cfg = load_config(common)?.to_run_config()?;
    let seeds = seeds_for(common, &cfg);
    let statuses: Vec<RunStatus> = seeds
        .par_iter()
        .map(|&seed| {
            let dir = if seeds.len() == 1 {
                common.out.clone()
            } else {
                common.out.join(format!("seed-{seed}"))
            };
            execute_one(cfg.clone(), seed, &dir)
        })
        .collect::<anyhow::Result<_>>()?;
    for s in &statuses {
        match (s.budget_exceeded, s.first_violation_round) {
            (true, _) => println!("seed {}: ABORTED (adversary budget exceeded)", s.seed),
            (false, Some(r)) => println!("seed {}: VIOLATION at round {r}", s.seed),
            (false, None) => println!("seed {}: ok", s.seed),
        }
    }
    if statuses.iter().any(|s| s.budget_exceeded) {
        Ok(EXIT_BUDGET)
    } else if statuses.iter().any(|s| s.violated) {
        Ok(EXIT_VIOLATION)
    } else {
        Ok(EXIT_OK)
    }
}

const GRID_KEYS: &[&str] = &["adversary", "adversary_budget", "gamma", "alpha", "n_target"];

fn parse_grid(axes: &[String]) -> anyhow::Result<Vec<Vec<(String, String)>>> {
    let mut parsed: Vec<(String, Vec<String>)> = Vec::new();
    for axis in axes {
        let (key, values) = axis
            .split_once('=')
            .with_context(|| format!("--grid expects KEY=V1,V2,..., got '{axis}'"))?;
        let key = key.trim();
        anyhow::ensure!(
            GRID_KEYS.contains(&key),
            "grid key '{key}' not supported; choose from {GRID_KEYS:?}"
        );
        parsed.push((
            key.to_string(),
            values.split(',').map(|v| v.trim().to_string()).collect(),
        ));
    }
    // Cartesian product, preserving axis order.
    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for (key, values) in parsed {
        let mut next = Vec::with_capacity(points.len() * values.len());
        for point in &points {
            for v in &values {
                let mut p = point.clone();
                p.push((key.clone(), v.clone()));
                next.push(p);
            }
        }
        points = next;
    }
    Ok(points)
}

fn grid_label(point: &[(String, String)]) -> String {
    if point.is_empty() {
        "base".to_string()
    } else {
        point
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(",")
    }
}

fn cmd_sweep(common: &CommonArgs, grid: &[String]) -> anyhow::Result<u8> {
    let base = load_config(common)?;
    let points = parse_grid(grid)?;
    // Resolve every grid point up front so config errors fail fast.
    let mut jobs: Vec<(String, RunConfig)> = Vec::new();
    for point in &points {
        let mut cfg = base.clone();
        for (k, v) in point {
            cfg.set(k, v)?;
        }
        jobs.push((grid_label(point), cfg.to_run_config()?));
    }
    let seeds = seeds_for(common, &jobs[0].1);
    std::fs::create_dir_all(&common.out)?;

    let results: Vec<(String, RunStatus)> = jobs
        .par_iter()
        .flat_map(|(label, cfg)| {
            seeds
                .par_iter()
                .map(move |&seed| {
                    let dir = common.out.join(format!("{label}/seed-{seed}").replace(['=', ','], "_"));
                    let status = execute_one(cfg.clone(), seed, &dir).unwrap_or(RunStatus {
                        seed,
                        violated: false,
                        first_violation_round: None,
                        budget_exceeded: true,
                        mean_abs_epoch_drift: None,
                    });
                    (label.clone(), status)
                })
                .collect::<Vec<_>>()
        })
        .collect();

    // Per-run rows.
    let mut runs_csv = String::from("grid_point,seed,violated,first_violation_round,budget_exceeded,mean_abs_epoch_drift\n");
    for (label, s) in &results {
        runs_csv.push_str(&format!(
            "{},{},{},{},{},{}\n",
            label,
            s.seed,
            u8::from(s.violated),
            s.first_violation_round.map(|r| r.to_string()).unwrap_or_default(),
            u8::from(s.budget_exceeded),
            s.mean_abs_epoch_drift.map(|d| format!("{d:.3}")).unwrap_or_default(),
        ));
    }
    std::fs::write(common.out.join("runs.csv"), runs_csv)?;

    // Aggregate rows per grid point.
    let mut agg_csv =
        String::from("grid_point,runs,violation_rate,mean_first_violation_round,mean_abs_epoch_drift\n");
    for (label, _) in &jobs {
        let rows: Vec<&RunStatus> = results
            .iter()
            .filter(|(l, _)| l == label)
            .map(|(_, s)| s)
            .collect();
        let n = rows.len() as f64;
        let violation_rate = rows.iter().filter(|s| s.violated).count() as f64 / n;
        let firsts: Vec<f64> = rows
            .iter()
            .filter_map(|s| s.first_violation_round.map(|r| r as f64))
            .collect();
        let mean_first = (!firsts.is_empty())
            .then(|| firsts.iter().sum::<f64>() / firsts.len() as f64);
        let drifts: Vec<f64> = rows.iter().filter_map(|s| s.mean_abs_epoch_drift).collect();
        let mean_drift = (!drifts.is_empty())
            .then(|| drifts.iter().sum::<f64>() / drifts.len() as f64);
        agg_csv.push_str(&format!(
            "{},{},{:.3},{},{}\n",
            label,
            rows.len(),
            violation_rate,
            mean_first.map(|v| format!("{v:.1}")).unwrap_or_default(),
            mean_drift.map(|v| format!("{v:.3}")).unwrap_or_default(),
        ));
        println!(
            "{label}: {} runs, violation rate {violation_rate:.3}",
            rows.len()
        );
    }
    std::fs::write(common.out.join("aggregate.csv"), agg_csv)?;
    Ok(EXIT_OK)
}

fn cmd_verify(common: &CommonArgs, quick: bool) -> anyhow::Result<u8> {
    // Verify accepts --set mutation=... (and seeds) but needs no config file.
    let cfg = load_config(common)?;
    let mutation = match cfg.get("mutation") {
        None | Some("none") => Mutation::None,
        Some("no_consistency_check") => Mutation::NoConsistencyCheck,
        Some("always_split") => Mutation::AlwaysSplit,
        Some(other) => anyhow::bail!("unknown mutation '{other}'"),
    };
    let mut vcfg = VerifyConfig {
        quick,
        mutation,
        ..VerifyConfig::default()
    };
    if !common.seed.is_empty() {
        vcfg.seeds = common.seed.clone();
    }
    let start = Instant::now();
    let report = run_battery(&vcfg).map_err(|e| anyhow::anyhow!("battery aborted: {e}"))?;
    for check in &report.checks {
        println!(
            "{} {:<20} {}",
            if check.pass { "PASS" } else { "FAIL" },
            check.name,
            check.detail
        );
    }
    std::fs::create_dir_all(&common.out)?;
    std::fs::write(
        common.out.join("verify_report.json"),
        serde_json::to_string_pretty(&report)?,
    )?;
    println!(
        "verify: {} ({} checks, {:.1}s)",
        if report.all_pass() { "PASS" } else { "FAIL" },
        report.checks.len(),
        start.elapsed().as_secs_f64()
    );
    Ok(if report.all_pass() { EXIT_OK } else { EXIT_VERIFY })
}

fn cmd_baselines(common: &CommonArgs) -> anyhow::Result<u8> {
    let mut cfg = load_config(common)?;
    // Demonstration defaults; a config file or --set can override any of them.
    for (k, v) in [
        ("n_target", "4096"),
        ("gamma", "1/2"),
        ("alpha", "1/10"),
        ("adversary_budget", "0"),
        ("max_rounds", "100000"),
        ("stop_on_violation", "true"),
    ] {
        if cfg.get(k).is_none() {
            cfg.set(k, v)?;
        }
    }
    let seeds: Vec<u64> = if common.seed.is_empty() {
        (1..=10).collect()
    } else {
        common.seed.clone()
    };
    std::fs::create_dir_all(&common.out)?;

    let mut rows = String::from("protocol,adversary,seed,first_violation_round,final_size\n");
    let mut summary: Vec<(String, usize, usize)> = Vec::new();
    for (label, protocol, adversary, budget) in [
        ("attempt2/null", "attempt2", "null", "0"),
        ("attempt1/leader_assassin", "attempt1", "leader_assassin", "4"),
        ("main/null", "main", "null", "0"),
    ] {
        let mut c = cfg.clone();
        c.set("protocol", protocol)?;
        c.set("adversary", adversary)?;
        c.set("adversary_budget", budget)?;
        let run_cfg = c.to_run_config()?;
        let results: Vec<(u64, Option<u64>, u64)> = seeds
            .par_iter()
            .map(|&seed| {
                let mut rc = run_cfg.clone();
                rc.seed = seed;
                let record = run_simulation(&rc).expect("baseline runs use builtin strategies");
                (seed, record.first_violation_round, record.final_size)
            })
            .collect();
        let exits = results.iter().filter(|(_, v, _)| v.is_some()).count();
        for (seed, first, final_size) in &results {
            rows.push_str(&format!(
                "{},{},{},{},{}\n",
                protocol,
                adversary,
                seed,
                first.map(|r| r.to_string()).unwrap_or_default(),
                final_size
            ));
        }
        println!(
            "{label}: {exits}/{} seeds left the interval within {} rounds",
            results.len(),
            run_cfg.max_rounds
        );
        summary.push((label.to_string(), exits, results.len()));
    }
    std::fs::write(common.out.join("baselines.csv"), rows)?;
    Ok(EXIT_OK)
}
