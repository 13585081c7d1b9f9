//! Output artifacts: the per-round trajectory CSV, the per-run summary JSON,
//! epoch-summary CSV and the property-check report JSON.
//!
//! Every artifact embeds the full resolved configuration and the seed, so any
//! result is reproducible from its own header. Trajectories are bit-exact
//! functions of `(config, seed)`; the RNG construction is named in the echo
//! so a change of algorithm is visible in the artifact.

use crate::analysis::{EpochSummary, LemmaReport};
use crate::engine::{RoundOutcome, RunConfig, RunRecord};
use crate::rng::RNG_ALGORITHM;
use num_traits::ToPrimitive;
use std::collections::BTreeMap;
use std::io::{self, Write};

/// Format version written into every trajectory header.
pub const TRAJECTORY_FORMAT: &str = "popstab trajectory v1";
/// Fixed column order of the trajectory CSV.
pub const TRAJECTORY_COLUMNS: &str =
    "round_index,size,births,deaths_eval,deaths_consistency,inserts,deletes,modifies,violation";

/// The fully resolved configuration of a run, as flat key-value pairs.
/// Includes the derived constants and the RNG identity.
pub fn config_echo(cfg: &RunConfig) -> BTreeMap<String, String> {
    let p = &cfg.params;
    let mut m = BTreeMap::new();
    let mut put = |k: &str, v: String| {
        m.insert(k.to_string(), v);
    };
    put("n_target", p.n_target.to_string());
    put("gamma", p.gamma.to_string());
    put("adversary_budget", p.adversary_budget.to_string());
    put("alpha", p.alpha.to_string());
    put("t_inner", p.t_inner.to_string());
    put("seed", cfg.seed.to_string());
    put("max_rounds", cfg.max_rounds.to_string());
    put("protocol", cfg.protocol.name().to_string());
    put("adversary", cfg.strategy.name().to_string());
    put(
        "adversary_target_color",
        (cfg.strategy_params.target_color as u8).to_string(),
    );
    if let Some(o) = cfg.strategy_params.round_offset {
        put("adversary_round_offset", o.to_string());
    }
    if let Some(c) = cfg.strategy_params.epoch_cap {
        put("adversary_epoch_cap", c.to_string());
    }
    if let Some(s) = cfg.strategy_params.stop_epoch {
        put("adversary_stop_epoch", s.to_string());
    }
    put(
        "match_fraction",
        match cfg.match_fraction {
            crate::scheduler::MatchFraction::Exact => "exact".into(),
            crate::scheduler::MatchFraction::UniformRandom => "uniform".into(),
        },
    );
    put("initial_population", cfg.initial_population.to_string());
    put("stop_on_violation", cfg.stop_on_violation.to_string());
    put("keep_history", cfg.keep_history.to_string());
    put(
        "mutation",
        match cfg.mutation {
            crate::protocol::Mutation::None => "none",
            crate::protocol::Mutation::NoConsistencyCheck => "no_consistency_check",
            crate::protocol::Mutation::AlwaysSplit => "always_split",
        }
        .to_string(),
    );
    if let Some(len) = cfg.baseline.attempt1_phase_len {
        put("attempt1_phase_len", len.to_string());
    }
    put(
        "attempt1_die_exponent",
        cfg.baseline.attempt1_die_exponent.to_string(),
    );
    put(
        "attempt2_no_split_count",
        cfg.baseline.attempt2_no_split_count.to_string(),
    );
    // Derived values and machinery identity, for the reader's benefit.
    put("derived.epoch_length", p.epoch_length.to_string());
    put("derived.leader_exponent", p.leader_exponent.to_string());
    put("derived.split_exponent", p.split_exponent.to_string());
    put("derived.state_count", p.state_count_report.to_string());
    put("rng", RNG_ALGORITHM.to_string());
    m
}

fn write_echo_comments<W: Write>(w: &mut W, echo: &BTreeMap<String, String>) -> io::Result<()> {
    for (k, v) in echo {
        writeln!(w, "# {k} = {v}")?;
    }
    Ok(())
}

/// Write the per-round trajectory CSV: a format/version comment, the resolved
/// config as comments, a header row, then one row per round.
pub fn write_trajectory_csv<W: Write>(
    w: &mut W,
    cfg: &RunConfig,
    outcomes: &[RoundOutcome],
) -> io::Result<()> {
    writeln!(w, "# {TRAJECTORY_FORMAT}")?;
    write_echo_comments(w, &config_echo(cfg))?;
    writeln!(w, "{TRAJECTORY_COLUMNS}")?;
    for o in outcomes {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{}",
            o.round_index,
            o.population_size,
            o.births,
            o.deaths_eval,
            o.deaths_consistency,
            o.adversary_inserts,
            o.adversary_deletes,
            o.adversary_modifies,
            u8::from(o.violation),
        )?;
    }
    Ok(())
}

/// The per-run summary document.
pub fn run_summary_json(
    cfg: &RunConfig,
    record: &RunRecord,
    wall_clock_seconds: f64,
) -> serde_json::Value {
    let violations = record.outcomes.iter().filter(|o| o.violation).count();
    let modifies: u64 = record.outcomes.iter().map(|o| o.adversary_modifies).sum();
    serde_json::json!({
        "config": config_echo(cfg),
        "seed": cfg.seed,
        "rng": RNG_ALGORITHM,
        "rounds_executed": record.outcomes.len(),
        "initial_size": record.initial_size,
        "final_size": record.final_size,
        "first_violation_round": record.first_violation_round,
        "violation_rounds": violations,
        "adversary_modifies_total": modifies,
        "wall_clock_seconds": wall_clock_seconds,
    })
}

/// Fixed column order of the epoch-summary CSV.
pub const EPOCH_COLUMNS: &str = "epoch_index,size_at_start,size_at_end,drift,leaders_color0,\
leaders_color1,colored0_at_eval,colored1_at_eval,honest_colored,adversary_touched_colored,\
matched_pairs_at_eval,to_recruit_nonzero_at_eval,active_fraction_max,wrong_round_count_max,complete";

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Write per-epoch summaries as CSV, with the same embedded config echo.
pub fn write_epoch_summaries_csv<W: Write>(
    w: &mut W,
    cfg: &RunConfig,
    summaries: &[EpochSummary],
) -> io::Result<()> {
    writeln!(w, "# popstab epoch summaries v1")?;
    write_echo_comments(w, &config_echo(cfg))?;
    writeln!(w, "{EPOCH_COLUMNS}")?;
    for s in summaries {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.epoch_index,
            s.size_at_start,
            s.size_at_end,
            s.drift,
            opt(s.leaders_by_color.map(|l| l.0)),
            opt(s.leaders_by_color.map(|l| l.1)),
            opt(s.colored_by_color_at_eval.map(|c| c.0)),
            opt(s.colored_by_color_at_eval.map(|c| c.1)),
            opt(s.honest_colored),
            opt(s.adversary_touched_colored),
            opt(s.matched_pairs_at_eval),
            opt(s.to_recruit_nonzero_at_eval),
            s.active_fraction_max.to_f64().unwrap_or(0.0),
            s.wrong_round_count_max,
            u8::from(s.complete),
        )?;
    }
    Ok(())
}

/// The property-check report document.
pub fn lemma_report_json(cfg: &RunConfig, report: &LemmaReport) -> serde_json::Value {
    serde_json::json!({
        "config": config_echo(cfg),
        "checks": report.checks,
    })
}
