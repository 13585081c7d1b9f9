//! The frozen verification battery behind `popstab verify`.
//!
//! Each check runs a fixed experiment configuration with fixed seeds and
//! compares measured quantities against thresholds frozen at calibration
//! time. The battery is deliberately sensitive to broken builds: disabling
//! the round-consistency check fails the desync purge, and forcing the split
//! probability to 1 fails the equilibrium-drift check.

use crate::adversary::{StrategyKind, StrategyParams};
use crate::analysis::{check_lemmas, summarize_run, CheckScope, EpochSummary, LemmaTolerances};
use crate::engine::{run_simulation, EngineError, ProtocolKind, RunConfig, RunRecord};
use crate::params::{validate_and_derive, Rational, RawSimParams};
use crate::protocol::Mutation;
use rayon::prelude::*;
use serde::Serialize;

/// Absolute bound on the pooled mean per-epoch drift of an on-target
/// population (N = 2^12, gamma = 1, 10 seeds x 50 epochs). Calibrated at
/// that scale: the per-epoch drift has deviation ~15.8 and a small
/// finite-size bias of about -1.7 (the balance between split and death
/// probabilities is exact only to first order in 16/sqrt(N), which is 1/4
/// at N = 2^12), so the pooled mean lands near -1.7 +- 0.7. The band covers
/// bias plus three standard errors, while the always-split mutant shifts
/// the mean by roughly +9 and lands outside it by more than four.
pub const EQUILIBRIUM_DRIFT_BAND: f64 = 4.0;

/// Additive slack on the desync wrong-round bound `(1 + 1/gamma) N^{1/4}`,
/// covering injected agents that have not yet crossed an evaluation-indicator
/// boundary.
pub const DESYNC_ROUND_SLACK: f64 = 16.0;

/// A main-protocol experiment the battery (and the acceptance suite) runs.
#[derive(Debug, Clone)]
pub struct MainRunSpec {
    pub n_target: u64,
    pub gamma: Rational,
    pub alpha: Rational,
    pub epochs: u64,
    pub initial_population: Option<u64>,
    pub mutation: Mutation,
    pub strategy: StrategyKind,
    pub strategy_params: StrategyParams,
    pub adversary_budget: u64,
}

impl MainRunSpec {
    /// Null-adversary run at the default gamma = 1/2, alpha = 1/10.
    pub fn null(n_target: u64, epochs: u64) -> Self {
        MainRunSpec {
            n_target,
            gamma: Rational::new(1, 2),
            alpha: Rational::new(1, 10),
            epochs,
            initial_population: None,
            mutation: Mutation::None,
            strategy: StrategyKind::Null,
            strategy_params: StrategyParams::default(),
            adversary_budget: 0,
        }
    }

    pub fn run_config(&self, seed: u64) -> RunConfig {
        let params = validate_and_derive(&RawSimParams {
            n_target: self.n_target,
            gamma: self.gamma,
            adversary_budget: self.adversary_budget,
            alpha: self.alpha,
            t_inner: None,
        })
        .expect("battery parameter sets are valid by construction");
        let mut cfg = RunConfig::for_epochs(params, seed, self.epochs);
        cfg.protocol = ProtocolKind::Main;
        cfg.strategy = self.strategy;
        cfg.strategy_params = self.strategy_params;
        cfg.mutation = self.mutation;
        if let Some(initial) = self.initial_population {
            cfg.initial_population = initial;
        }
        cfg
    }

    /// Execute for one seed, returning the record and its epoch summaries.
    pub fn execute(&self, seed: u64) -> Result<(RunRecord, Vec<EpochSummary>), EngineError> {
        let cfg = self.run_config(seed);
        let record = run_simulation(&cfg)?;
        let summaries = summarize_run(&record, &cfg.params);
        Ok((record, summaries))
    }

    /// Execute for many seeds in parallel.
    pub fn execute_seeds(
        &self,
        seeds: &[u64],
    ) -> Result<Vec<(RunRecord, Vec<EpochSummary>)>, EngineError> {
        seeds.par_iter().map(|&s| self.execute(s)).collect()
    }
}

/// One named battery check and its verdict.
#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &'static str, pass: bool, detail: String) -> Self {
        CheckOutcome { name, pass, detail }
    }
}

/// Result of a battery run. `lemma_reports` holds the per-seed property
/// reports of the stability runs, in seed order.
#[derive(Debug, Clone, Serialize)]
pub struct BatteryReport {
    pub quick: bool,
    pub mutation: String,
    pub checks: Vec<CheckOutcome>,
    pub lemma_reports: Vec<crate::analysis::LemmaReport>,
}

impl BatteryReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

/// Battery configuration: fixed seeds, scale preset and the mutation under
/// test (`Mutation::None` for a regular verification).
#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seeds: Vec<u64>,
    pub quick: bool,
    pub mutation: Mutation,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seeds: (1..=10).collect(),
            quick: false,
            mutation: Mutation::None,
        }
    }
}

/// Stability under the null adversary: no violations, and the per-epoch
/// property checks hold on every seed. Returns the per-seed property
/// reports alongside the aggregated verdicts.
pub fn stability_check(
    spec: &MainRunSpec,
    seeds: &[u64],
) -> Result<(Vec<CheckOutcome>, Vec<crate::analysis::LemmaReport>), EngineError> {
    let runs = spec.execute_seeds(seeds)?;
    let total_violations: usize = runs
        .iter()
        .map(|(r, _)| r.outcomes.iter().filter(|o| o.violation).count())
        .sum();
    let mut checks = vec![CheckOutcome::new(
        "stability_null",
        total_violations == 0,
        format!(
            "{} violations across {} seeds x {} epochs at N={}",
            total_violations,
            seeds.len(),
            spec.epochs,
            spec.n_target
        ),
    )];
    let tol = LemmaTolerances::default();
    let params = spec.run_config(seeds[0]).params;
    let scope = CheckScope {
        null_adversary: spec.strategy == StrategyKind::Null,
    };
    let mut failures = Vec::new();
    let mut max_drift = 0u64;
    let mut max_color_dev = 0.0f64;
    let mut reports = Vec::with_capacity(runs.len());
    for (i, (record, summaries)) in runs.iter().enumerate() {
        let report = check_lemmas(&record.outcomes, summaries, &params, &tol, scope);
        for check in &report.checks {
            if !check.pass {
                failures.push(format!("seed {}: {}", seeds[i], check.lemma_id));
            }
        }
        if let Some(c) = report.get("bounded_deviation") {
            max_drift = max_drift.max(c.quantity.unwrap_or(0.0) as u64);
        }
        if let Some(c) = report.get("per_color_counts") {
            max_color_dev = max_color_dev.max(c.quantity.unwrap_or(0.0));
        }
        reports.push(report);
    }
    let l = f64::from(params.log2_n());
    let n = params.n_target as f64;
    checks.push(CheckOutcome::new(
        "bounded_deviation",
        !failures.iter().any(|f| f.contains("bounded_deviation")),
        format!(
            "max |drift| {} vs bound {:.0}",
            max_drift,
            tol.c_dev * n.sqrt() * l.powi(3)
        ),
    ));
    checks.push(CheckOutcome::new(
        "per_color_counts",
        !failures.iter().any(|f| f.contains("per_color_counts")),
        format!(
            "max |color - m/16| {:.0} vs bound {:.0}",
            max_color_dev,
            tol.c_color * n.powf(0.75)
        ),
    ));
    let other_failures: Vec<&String> = failures
        .iter()
        .filter(|f| !f.contains("bounded_deviation") && !f.contains("per_color_counts"))
        .collect();
    checks.push(CheckOutcome::new(
        "stability_lemmas",
        other_failures.is_empty(),
        if other_failures.is_empty() {
            "round-consistency, half-active and recruitment checks pass on every seed".into()
        } else {
            format!("failing: {other_failures:?}")
        },
    ));
    Ok((checks, reports))
}

fn displaced_runs(
    n_target: u64,
    gamma: Rational,
    epochs: u64,
    seeds: &[u64],
    factor: (u64, u64),
    mutation: Mutation,
) -> Result<Vec<(RunRecord, Vec<EpochSummary>)>, EngineError> {
    let spec = MainRunSpec {
        gamma,
        epochs,
        initial_population: Some(n_target * factor.0 / factor.1),
        mutation,
        ..MainRunSpec::null(n_target, epochs)
    };
    spec.execute_seeds(seeds)
}

/// Restoring-drift sign, per seed: the displaced population's mean per-epoch
/// drift must point back toward the target in at least `required` seeds.
/// `factor` is the initial displacement as a fraction of N.
pub fn drift_sign_check(
    n_target: u64,
    gamma: Rational,
    epochs: u64,
    seeds: &[u64],
    factor: (u64, u64),
    mutation: Mutation,
    required: usize,
) -> Result<CheckOutcome, EngineError> {
    let below = factor.0 < factor.1;
    let runs = displaced_runs(n_target, gamma, epochs, seeds, factor, mutation)?;
    let correct: usize = runs
        .iter()
        .filter(|(_, summaries)| {
            let complete: Vec<_> = summaries.iter().filter(|s| s.complete).collect();
            if complete.is_empty() {
                return false;
            }
            let mean =
                complete.iter().map(|s| s.drift).sum::<i64>() as f64 / complete.len() as f64;
            if below {
                mean > 0.0
            } else {
                mean < 0.0
            }
        })
        .count();
    let name = if below {
        "drift_sign_low"
    } else {
        "drift_sign_high"
    };
    Ok(CheckOutcome::new(
        name,
        correct >= required,
        format!(
            "{} of {} seeds drift {} from {}/{}·N over {} epochs",
            correct,
            seeds.len(),
            if below { "up" } else { "down" },
            factor.0,
            factor.1,
            epochs
        ),
    ))
}

/// Restoring-drift sign, pooled: the mean per-epoch drift over all seeds and
/// epochs must point back toward the target by at least `min_z` standard
/// errors. Statistically sound at displacements where the per-epoch signal
/// is a sizeable fraction of the per-epoch noise.
pub fn drift_sign_pooled_check(
    n_target: u64,
    gamma: Rational,
    epochs: u64,
    seeds: &[u64],
    factor: (u64, u64),
    mutation: Mutation,
    min_z: f64,
) -> Result<CheckOutcome, EngineError> {
    let below = factor.0 < factor.1;
    let runs = displaced_runs(n_target, gamma, epochs, seeds, factor, mutation)?;
    let drifts: Vec<f64> = runs
        .iter()
        .flat_map(|(_, summaries)| {
            summaries
                .iter()
                .filter(|s| s.complete)
                .map(|s| s.drift as f64)
                .collect::<Vec<_>>()
        })
        .collect();
    let n = drifts.len() as f64;
    let mean = drifts.iter().sum::<f64>() / n.max(1.0);
    let var = drifts.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let se = (var / n.max(1.0)).sqrt().max(f64::MIN_POSITIVE);
    let z = if below { mean / se } else { -mean / se };
    let name = if below {
        "drift_restores_low"
    } else {
        "drift_restores_high"
    };
    Ok(CheckOutcome::new(
        name,
        !drifts.is_empty() && z >= min_z,
        format!(
            "pooled mean drift {:.2}/epoch from {}/{}·N, {:.1} standard errors toward target (need {min_z})",
            mean, factor.0, factor.1, z
        ),
    ))
}

/// On-target populations must show no systematic drift: the pooled mean
/// per-epoch drift over all seeds stays inside the calibrated band. The
/// always-split mutant pushes the mean far outside it.
pub fn equilibrium_check(seeds: &[u64], mutation: Mutation) -> Result<CheckOutcome, EngineError> {
    let spec = MainRunSpec {
        gamma: Rational::new(1, 1),
        mutation,
        ..MainRunSpec::null(1 << 12, 50)
    };
    let runs = spec.execute_seeds(seeds)?;
    let drifts: Vec<i64> = runs
        .iter()
        .flat_map(|(_, summaries)| {
            summaries
                .iter()
                .filter(|s| s.complete)
                .map(|s| s.drift)
                .collect::<Vec<_>>()
        })
        .collect();
    let mean = drifts.iter().sum::<i64>() as f64 / drifts.len().max(1) as f64;
    Ok(CheckOutcome::new(
        "equilibrium_drift",
        !drifts.is_empty() && mean.abs() <= EQUILIBRIUM_DRIFT_BAND,
        format!(
            "pooled mean drift {:.2} per epoch over {} epochs (band +-{})",
            mean,
            drifts.len(),
            EQUILIBRIUM_DRIFT_BAND
        ),
    ))
}

/// Desynchronized insertions are purged: with `floor(N^{1/4}/8)` wrong-round
/// agents injected per epoch, the wrong-round count stays under
/// `(1 + 1/gamma) N^{1/4}` plus slack in every round, and returns to zero
/// within two epochs after injection stops.
pub fn desync_check(
    n_target: u64,
    seed: u64,
    inject_epochs: u64,
    mutation: Mutation,
) -> Result<Vec<CheckOutcome>, EngineError> {
    let cap = (n_target as f64).powf(0.25) as u64 / 8;
    let cap = cap.max(1);
    let spec = MainRunSpec {
        gamma: Rational::new(1, 1),
        adversary_budget: cap,
        strategy: StrategyKind::DesyncInserter,
        strategy_params: StrategyParams {
            epoch_cap: Some(cap),
            stop_epoch: Some(inject_epochs),
            ..StrategyParams::default()
        },
        mutation,
        ..MainRunSpec::null(n_target, inject_epochs + 3)
    };
    let cfg = spec.run_config(seed);
    let t = u64::from(cfg.params.epoch_length);
    let record = run_simulation(&cfg)?;
    let n = n_target as f64;
    let gamma = 1.0;
    let bound = (1.0 + 1.0 / gamma) * n.powf(0.25) + DESYNC_ROUND_SLACK;
    let worst = record
        .observations
        .iter()
        .map(|o| o.wrong_round)
        .max()
        .unwrap_or(0);
    let mut checks = vec![CheckOutcome::new(
        "desync_bound",
        (worst as f64) <= bound,
        format!(
            "max wrong-round count {} vs bound {:.0} (inject {} per epoch at N={})",
            worst, bound, cap, n_target
        ),
    )];
    // Two epochs after the last injection epoch, the stragglers must be gone
    // and stay gone.
    let settled_from = ((inject_epochs + 2) * t) as usize;
    let residue = record
        .observations
        .get(settled_from..)
        .map(|tail| tail.iter().map(|o| o.wrong_round).max().unwrap_or(0))
        .unwrap_or(u64::MAX);
    checks.push(CheckOutcome::new(
        "desync_decay",
        residue == 0,
        format!(
            "wrong-round count from epoch {} onward: max {}",
            inject_epochs + 2,
            residue
        ),
    ));
    Ok(checks)
}

/// A displaced population returns to the inner interval within the window.
///
/// Runs at N = 2^12 from 0.4 N with a wide alpha. The geometry respects the
/// finite-size equilibrium: at this scale the protocol's fixed point sits
/// near 0.89 N (the split probability 1 - 16/sqrt(N) is only 3/4, so the
/// second-order terms of the balance shift it below N), and the restoring
/// drift from 0.4 N is ~4 agents/epoch, reaching the inner boundary
/// 0.51 N in ~120 epochs against the 300-epoch window.
pub fn recovery_check(seed: u64) -> Result<CheckOutcome, EngineError> {
    let tol = LemmaTolerances::default();
    let spec = MainRunSpec {
        gamma: Rational::new(1, 1),
        alpha: Rational::new(49, 50),
        epochs: tol.recovery_window_epochs + 10,
        initial_population: Some((1 << 12) * 2 / 5),
        ..MainRunSpec::null(1 << 12, tol.recovery_window_epochs + 10)
    };
    let cfg = spec.run_config(seed);
    let record = run_simulation(&cfg)?;
    let summaries = summarize_run(&record, &cfg.params);
    let report = check_lemmas(
        &record.outcomes,
        &summaries,
        &cfg.params,
        &tol,
        CheckScope {
            null_adversary: true,
        },
    );
    let check = report
        .get("recovery_window")
        .expect("displaced start always emits the recovery check");
    Ok(CheckOutcome::new(
        "recovery_window",
        check.pass,
        format!(
            "recovered at epoch {:?} (window {})",
            check.quantity, tol.recovery_window_epochs
        ),
    ))
}


/// Run the battery. The full battery is the one `popstab verify` executes by
/// default; `quick` is a reduced smoke preset that still detects both
/// reference mutants.
pub fn run_battery(vcfg: &VerifyConfig) -> Result<BatteryReport, EngineError> {
    let mut checks = Vec::new();
    let default_seeds;
    let seeds: &[u64] = if vcfg.seeds.is_empty() {
        default_seeds = VerifyConfig::default().seeds;
        &default_seeds
    } else {
        &vcfg.seeds
    };
    let lemma_reports;
    if vcfg.quick {
        let spec = MainRunSpec {
            mutation: vcfg.mutation,
            ..MainRunSpec::null(1 << 12, 20)
        };
        let smoke_seeds: Vec<u64> = seeds.iter().copied().take(3).collect();
        let (stability, reports) = stability_check(&spec, &smoke_seeds)?;
        checks.extend(stability);
        lemma_reports = reports;
        checks.push(equilibrium_check(seeds, vcfg.mutation)?);
        checks.extend(desync_check(1 << 16, seeds[0], 2, vcfg.mutation)?);
    } else {
        let spec = MainRunSpec {
            mutation: vcfg.mutation,
            ..MainRunSpec::null(1 << 16, 50)
        };
        let (stability, reports) = stability_check(&spec, seeds)?;
        checks.extend(stability);
        lemma_reports = reports;
        // Drift-sign at half/one-and-a-half N, where the restoring signal is
        // strong enough for a sound pooled test (at 0.75 N it is ~0.07
        // standard deviations per epoch and no fixed-seed test of this size
        // can call the sign reliably).
        checks.push(drift_sign_pooled_check(
            1 << 16,
            Rational::new(1, 2),
            20,
            seeds,
            (1, 2),
            vcfg.mutation,
            2.5,
        )?);
        checks.push(drift_sign_pooled_check(
            1 << 16,
            Rational::new(1, 2),
            20,
            seeds,
            (3, 2),
            vcfg.mutation,
            2.5,
        )?);
        checks.push(equilibrium_check(seeds, vcfg.mutation)?);
        checks.extend(desync_check(1 << 20, seeds[0], 2, vcfg.mutation)?);
        checks.push(recovery_check(seeds[0])?);
    }
    Ok(BatteryReport {
        quick: vcfg.quick,
        mutation: format!("{:?}", vcfg.mutation),
        checks,
        lemma_reports,
    })
}
