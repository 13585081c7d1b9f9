//! Metrics, per-epoch summaries, the exact expected-drift oracle, and
//! executable checkers for the protocol's stability properties.
//!
//! All oracle arithmetic is exact (integers and rationals); Monte-Carlo
//! estimates appear only as validation counterparties in tests, never as the
//! reference. The asymptotic bounds carry hidden constants the source
//! analysis does not pin down; those constants were calibrated once from
//! null-adversary runs (see [`LemmaTolerances`]) and frozen here.

use crate::engine::{RoundOutcome, RunRecord};
use crate::params::{Rational, SimParams};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

/// Everything measured about one epoch of a main-protocol run.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochSummary {
    pub epoch_index: u64,
    /// Population entering the epoch.
    pub size_at_start: u64,
    /// Population at the end of the epoch's last completed round.
    pub size_at_end: u64,
    /// `size_at_end - size_at_start`.
    pub drift: i64,
    /// Active agents by color right after leader selection.
    pub leaders_by_color: Option<(u64, u64)>,
    /// Active agents by color at the entry of the evaluation round.
    pub colored_by_color_at_eval: Option<(u64, u64)>,
    /// Colored agents in clusters the adversary did not touch this epoch.
    pub honest_colored: Option<u64>,
    /// Colored agents in touched or unattributable clusters.
    pub adversary_touched_colored: Option<u64>,
    pub matched_pairs_at_eval: Option<u64>,
    /// Colored agents entering evaluation with unfinished recruitment,
    /// excluding adversary-inserted ones.
    pub to_recruit_nonzero_at_eval: Option<u64>,
    /// Maximum of active/size over the epoch's rounds, exact.
    pub active_fraction_max: Rational,
    /// Maximum per-round count of agents off the modal round value.
    pub wrong_round_count_max: u64,
    /// False when the run ended mid-epoch; statistical checks skip partial
    /// epochs.
    pub complete: bool,
}

/// Summarize one epoch from its observation record and the per-round data
/// of the rounds it spans. `complete` is false when the run ended mid-epoch,
/// which flags the summary as partial for the statistical checks.
pub fn summarize_epoch(
    ep: &crate::engine::EpochObservation,
    outcomes: &[RoundOutcome],
    observations: &[crate::engine::RoundObservation],
    complete: bool,
) -> EpochSummary {
    let size_at_end = outcomes.last().map_or(ep.start_size, |o| o.population_size);
    let mut frac_max = Rational::zero();
    for o in observations {
        if o.size > 0 {
            let f = Rational::new(o.active, o.size);
            if f > frac_max {
                frac_max = f;
            }
        }
    }
    EpochSummary {
        epoch_index: ep.epoch_index,
        size_at_start: ep.start_size,
        size_at_end,
        drift: size_at_end as i64 - ep.start_size as i64,
        leaders_by_color: ep.leaders_by_color,
        colored_by_color_at_eval: ep.eval.map(|e| e.colored_by_color),
        honest_colored: ep.eval.map(|e| e.honest_colored),
        adversary_touched_colored: ep.eval.map(|e| e.adversary_touched_colored),
        matched_pairs_at_eval: ep.eval.map(|e| e.matched_pairs),
        to_recruit_nonzero_at_eval: ep.eval.map(|e| e.to_recruit_nonzero),
        active_fraction_max: frac_max,
        wrong_round_count_max: observations.iter().map(|o| o.wrong_round).max().unwrap_or(0),
        complete,
    }
}

/// Build per-epoch summaries from a finished main-protocol run.
pub fn summarize_run(record: &RunRecord, params: &SimParams) -> Vec<EpochSummary> {
    let t = params.epoch_length as usize;
    let rounds = record.outcomes.len();
    debug_assert_eq!(record.observations.len(), rounds);
    let mut summaries = Vec::with_capacity(record.epochs.len());
    for ep in &record.epochs {
        let start_round = ep.epoch_index as usize * t;
        let end_round = (start_round + t).min(rounds);
        if start_round >= rounds {
            break;
        }
        summaries.push(summarize_epoch(
            ep,
            &record.outcomes[start_round..end_round],
            &record.observations[start_round..end_round],
            end_round == start_round + t,
        ));
    }
    summaries
}

fn big(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn big_ratio(r: Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Exact expected-drift prediction for the evaluation round.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftPrediction {
    /// Expected population change from matching one pair of agents that both
    /// sit in honest clusters: `2 sqrt(N)/m_h - 16/sqrt(N)`.
    pub per_pair_honest_delta: BigRational,
    /// Probability that a random matched pair is honest-honest, `(m_h/m')^2`
    /// with `m' = 2 * matched_pairs / gamma`.
    pub honest_pair_probability: BigRational,
    /// `matched_pairs * honest_pair_probability * per_pair_honest_delta`.
    pub expected_delta: BigRational,
}

/// Expected change in population during an evaluation round, from the honest
/// clusters alone (adversarial clusters are unmodeled error terms).
///
/// `sqrt(N)` is an exact integer because `n_target` is a power of four.
/// Returns `None` when `m_h = 0`: the per-pair quantity is undefined.
pub fn expected_eval_delta(
    m_h: u64,
    n_target: u64,
    gamma: Rational,
    matched_pairs: u64,
) -> Option<DriftPrediction> {
    if m_h == 0 {
        return None;
    }
    let sqrt_n = big(1u64 << (n_target.trailing_zeros() / 2));
    let per_pair = big(2) * &sqrt_n / big(m_h) - big(16) / &sqrt_n;
    let honest_pair_probability = if matched_pairs == 0 {
        BigRational::zero()
    } else {
        // m' = 2 * matched_pairs / gamma agents at the evaluation entry.
        let m_prime = big(2) * big(matched_pairs) / big_ratio(gamma);
        let ratio = big(m_h) / m_prime;
        &ratio * &ratio
    };
    let expected_delta = big(matched_pairs) * &honest_pair_probability * &per_pair;
    Some(DriftPrediction {
        per_pair_honest_delta: per_pair,
        honest_pair_probability,
        expected_delta,
    })
}

/// Exact expected population change from matching one uniformly random pair
/// of colored agents drawn from explicit clusters.
///
/// Agents in the same cluster share a color by construction; different
/// clusters carry whatever colors the argument assigns. An equal-color pair
/// contributes `+2 p_split` (each side splits independently), an
/// unequal-color pair contributes `-2`. Empty or singleton populations
/// yield zero.
pub fn exact_pair_delta(clusters: &[(u64, bool)], p_split: &BigRational) -> BigRational {
    let total: u64 = clusters.iter().map(|&(s, _)| s).sum();
    if total < 2 {
        return BigRational::zero();
    }
    let by_color: [u64; 2] = clusters.iter().fold([0, 0], |mut acc, &(s, c)| {
        acc[usize::from(c)] += s;
        acc
    });
    let pairs_same = big(by_color[0] * by_color[0].saturating_sub(1) / 2)
        + big(by_color[1] * by_color[1].saturating_sub(1) / 2);
    let pairs_diff = big(by_color[0] * by_color[1]);
    let pairs_total = big(total * (total - 1) / 2);
    (pairs_same * big(2) * p_split - pairs_diff * big(2)) / pairs_total
}

/// The split probability `1 - 2^-split_exponent` as an exact rational.
pub fn split_probability(params: &SimParams) -> BigRational {
    BigRational::one() - big(1) / big(1u64 << params.split_exponent)
}

/// Frozen constants for the asymptotic property checks.
///
/// The asymptotic bounds hide constants the analysis does not pin down;
/// these were calibrated once from null-adversary runs at N = 2^16 with
/// calibration seeds (1000+) disjoint from the acceptance seeds, then frozen
/// with generous headroom (reproduce with the `calibrate` example):
///
/// * per-epoch drift: mean -0.3, deviation ~47, max |drift| 148 over the
///   calibration epochs; `c_dev = 0.0008` puts the bound at ~839 for
///   N = 2^16, roughly eighteen deviations, far above any observed epoch
///   but still a small multiple of `sqrt(N)`;
/// * per-color deviation from m/16: mean ~1.2e3, deviation ~1.1e3
///   (binomial leader-count noise times the cluster size); `c_color = 1.5`
///   puts the bound at `1.5 N^{3/4}` ~ 6144, about 5.3 deviations;
/// * wrong-round counts stay near the per-epoch injection cap, so
///   `c_round = 1` with an additive slack of 16 covers stragglers that have
///   not yet crossed an evaluation boundary.
#[derive(Debug, Clone, PartialEq)]
pub struct LemmaTolerances {
    /// Multiplier on `(1 + 1/gamma) N^{1/4}` for the wrong-round bound.
    pub c_round: f64,
    /// Additive slack on the wrong-round bound, covering injected agents
    /// that have not yet met a purging partner.
    pub round_slack: f64,
    /// Additive slack over 1/2 for the active-fraction bound.
    pub active_slack: f64,
    /// Multiplier on `N^{3/4}` for the per-color count deviation.
    pub c_color: f64,
    /// Multiplier on `sqrt(N) log2(N)^3` for the per-epoch drift bound.
    pub c_dev: f64,
    /// Minimum displaced epochs before the drift-sign check is meaningful.
    pub min_epochs_for_sign: usize,
    /// Epoch budget for the recovery-window check.
    pub recovery_window_epochs: u64,
}

impl Default for LemmaTolerances {
    fn default() -> Self {
        LemmaTolerances {
            c_round: 1.0,
            round_slack: 16.0,
            active_slack: 0.05,
            c_color: 1.5,
            c_dev: 0.0008,
            min_epochs_for_sign: 5,
            recovery_window_epochs: 300,
        }
    }
}

/// What kind of run the checker is looking at; gates which checks apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CheckScope {
    /// True when the run used the null strategy; recruitment completion is
    /// only a theorem in that regime.
    pub null_adversary: bool,
}

/// One executable property check with its measured margin.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaCheck {
    pub lemma_id: &'static str,
    /// The measured quantity; `None` when the run had too little data, in
    /// which case the check is inconclusive and never passes.
    pub quantity: Option<f64>,
    pub bound: f64,
    /// `bound - quantity` for upper bounds, `|quantity|` for sign checks.
    pub margin: Option<f64>,
    pub pass: bool,
}

/// The full report of [`check_lemmas`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaReport {
    pub checks: Vec<LemmaCheck>,
}

impl LemmaReport {
    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn get(&self, lemma_id: &str) -> Option<&LemmaCheck> {
        self.checks.iter().find(|c| c.lemma_id == lemma_id)
    }
}

fn upper_bound_check(lemma_id: &'static str, quantity: Option<f64>, bound: f64) -> LemmaCheck {
    LemmaCheck {
        lemma_id,
        quantity,
        bound,
        margin: quantity.map(|q| bound - q),
        pass: quantity.is_some_and(|q| q <= bound),
    }
}

/// Run every applicable property check over a finished run.
///
/// Pure function of its inputs: re-running on a saved trajectory reproduces
/// the report byte for byte.
pub fn check_lemmas(
    _trajectory: &[RoundOutcome],
    summaries: &[EpochSummary],
    params: &SimParams,
    tol: &LemmaTolerances,
    scope: CheckScope,
) -> LemmaReport {
    let n = params.n_target as f64;
    let gamma = *params.gamma.numer() as f64 / *params.gamma.denom() as f64;
    let complete: Vec<&EpochSummary> = summaries.iter().filter(|s| s.complete).collect();
    let mut checks = Vec::new();

    // (a) Nearly every agent knows the correct round.
    let round_bound = tol.c_round * (1.0 + 1.0 / gamma) * n.powf(0.25) + tol.round_slack;
    let wrong_max = summaries
        .iter()
        .map(|s| s.wrong_round_count_max)
        .max()
        .map(|m| m as f64);
    checks.push(upper_bound_check("round_consistency", wrong_max, round_bound));

    // (b) At most half of the agents are ever active.
    let frac_max = summaries
        .iter()
        .map(|s| s.active_fraction_max)
        .max()
        .and_then(|f| f.to_f64());
    checks.push(upper_bound_check(
        "half_active",
        frac_max,
        0.5 + tol.active_slack,
    ));

    // (c) Recruitment completes: colored agents reach the evaluation round
    // with no leftover obligation (null-adversary runs only).
    if scope.null_adversary {
        let pending_max = complete
            .iter()
            .filter_map(|s| s.to_recruit_nonzero_at_eval)
            .max()
            .map(|m| m as f64);
        checks.push(upper_bound_check(
            "recruitment_completes",
            pending_max,
            0.0,
        ));
    }

    // (d) Per-color counts concentrate around m/16.
    let color_bound = tol.c_color * n.powf(0.75);
    let color_dev = complete
        .iter()
        .filter_map(|s| {
            s.colored_by_color_at_eval.map(|(c0, c1)| {
                let target = s.size_at_start as f64 / 16.0;
                (c0 as f64 - target).abs().max((c1 as f64 - target).abs())
            })
        })
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    checks.push(upper_bound_check("per_color_counts", color_dev, color_bound));

    // (e) Per-epoch deviation stays within the calibrated envelope.
    let l = f64::from(params.log2_n());
    let dev_bound = tol.c_dev * n.sqrt() * l.powi(3);
    let drift_max = complete
        .iter()
        .map(|s| s.drift.unsigned_abs())
        .max()
        .map(|m| m as f64);
    checks.push(upper_bound_check("bounded_deviation", drift_max, dev_bound));

    // (f) Restoring drift: epochs starting outside the inner interval
    // [(1 -/+ alpha/2) N] drift back toward N in the mean.
    let half_alpha = params.alpha / Rational::from_integer(2);
    let n_rat = Rational::from_integer(params.n_target);
    let inner_lo = ((Rational::one() - half_alpha) * n_rat).ceil().to_integer();
    let inner_hi = ((Rational::one() + half_alpha) * n_rat).floor().to_integer();
    let below: Vec<i64> = complete
        .iter()
        .filter(|s| s.size_at_start < inner_lo)
        .map(|s| s.drift)
        .collect();
    let above: Vec<i64> = complete
        .iter()
        .filter(|s| s.size_at_start > inner_hi)
        .map(|s| s.drift)
        .collect();
    let (drifts, want_positive) = if below.len() >= above.len() {
        (&below, true)
    } else {
        (&above, false)
    };
    if !drifts.is_empty() {
        let enough = drifts.len() >= tol.min_epochs_for_sign;
        let mean = drifts.iter().sum::<i64>() as f64 / drifts.len() as f64;
        let signed_toward_target = if want_positive { mean } else { -mean };
        checks.push(LemmaCheck {
            lemma_id: "restoring_drift",
            quantity: enough.then_some(mean),
            bound: 0.0,
            margin: enough.then_some(mean.abs()),
            pass: enough && signed_toward_target > 0.0,
        });
    }

    // (g) Recovery window: a run that starts displaced returns to the inner
    // interval within the configured number of epochs.
    if let Some(first) = summaries.first() {
        if first.size_at_start < inner_lo || first.size_at_start > inner_hi {
            let recovered_at = summaries
                .iter()
                .find(|s| (inner_lo..=inner_hi).contains(&s.size_at_start))
                .map(|s| s.epoch_index);
            let window = tol.recovery_window_epochs;
            let observed_epochs = summaries.len() as u64;
            let quantity = match recovered_at {
                Some(e) => Some(e as f64),
                // Never recovered: conclusive failure only if we watched at
                // least the whole window.
                None if observed_epochs >= window => Some(f64::INFINITY),
                None => None,
            };
            checks.push(LemmaCheck {
                lemma_id: "recovery_window",
                quantity,
                bound: window as f64,
                margin: quantity.map(|q| window as f64 - q),
                pass: quantity.is_some_and(|q| q <= window as f64),
            });
        }
    }

    LemmaReport { checks }
}
