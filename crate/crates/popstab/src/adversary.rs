//! The worst-case adversary interface: full-state observation plus budgeted
//! deletions, insertions and memory modifications, and the built-in attack
//! strategies.
//!
//! The adversary acts at the start of each round, before the matching is
//! sampled (the matching schedule is not known to it in advance) and before
//! any coin of the round is flipped. Strategies are pure functions of the
//! snapshot and their own RNG stream: they return a list of operations and
//! never touch simulation state directly. Budget enforcement is engine-side.

use crate::agent::{AgentHandle, AgentRecord, AgentState};
use crate::engine::RoundOutcome;
use crate::params::SimParams;
use crate::rng::CoinStream;
use rand::seq::index::sample as index_sample;
use std::collections::HashMap;

/// One alteration. Each variant costs exactly one budget unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversaryOp<S> {
    /// Remove the agent with this handle.
    Delete(AgentHandle),
    /// Insert a new agent with an arbitrary state. The inserted agent runs
    /// the standard protocol from that state onward.
    Insert(S),
    /// Overwrite the memory of a live agent.
    Modify(AgentHandle, S),
}

/// Read-only view of the system the adversary observes before acting:
/// every live agent's full state, the current round index, and the per-round
/// metric log (plus full past populations when history retention is on).
pub struct Snapshot<'a, S> {
    round_index: u64,
    records: &'a [AgentRecord<S>],
    outcomes: &'a [RoundOutcome],
    past: Option<&'a [Vec<(AgentHandle, S)>]>,
}

impl<'a, S> Snapshot<'a, S> {
    pub(crate) fn new(
        round_index: u64,
        records: &'a [AgentRecord<S>],
        outcomes: &'a [RoundOutcome],
        past: Option<&'a [Vec<(AgentHandle, S)>]>,
    ) -> Self {
        Snapshot {
            round_index,
            records,
            outcomes,
            past,
        }
    }

    pub fn round_index(&self) -> u64 {
        self.round_index
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Iterate over `(handle, state)` of every live agent, in population
    /// order. Observer-side metadata is not exposed.
    pub fn iter(&self) -> impl Iterator<Item = (AgentHandle, &'a S)> + '_ {
        self.records.iter().map(|r| (r.handle, &r.state))
    }

    /// The per-round metric log of all completed rounds.
    pub fn outcomes(&self) -> &'a [RoundOutcome] {
        self.outcomes
    }

    /// Full population of a past round, if history retention is enabled.
    pub fn past_population(&self, round_index: u64) -> Option<&'a [(AgentHandle, S)]> {
        let past = self.past?;
        past.get(round_index as usize).map(Vec::as_slice)
    }
}

/// An adversary strategy: maps a snapshot and a budget to at most `budget`
/// operations. Must be deterministic given the snapshot and the RNG stream.
pub trait Strategy<S>: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether the strategy may emit `Modify` ops; recorded in run metadata.
    fn uses_modify(&self) -> bool {
        false
    }

    fn act(&self, snapshot: &Snapshot<'_, S>, budget: u64, rng: &mut CoinStream)
        -> Vec<AdversaryOp<S>>;
}

/// Identifier of a built-in strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StrategyKind {
    #[default]
    Null,
    UniformDeleter,
    LeaderAssassin,
    ColorFlooder,
    DesyncInserter,
    EvalSuppressor,
    AdaptiveGreedy,
}

impl StrategyKind {
    pub fn name(self) -> &'static str {
        match self {
            StrategyKind::Null => "null",
            StrategyKind::UniformDeleter => "uniform_deleter",
            StrategyKind::LeaderAssassin => "leader_assassin",
            StrategyKind::ColorFlooder => "color_flooder",
            StrategyKind::DesyncInserter => "desync_inserter",
            StrategyKind::EvalSuppressor => "eval_suppressor",
            StrategyKind::AdaptiveGreedy => "adaptive_greedy",
        }
    }
}

impl std::str::FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "null" => Ok(StrategyKind::Null),
            "uniform_deleter" => Ok(StrategyKind::UniformDeleter),
            "leader_assassin" => Ok(StrategyKind::LeaderAssassin),
            "color_flooder" => Ok(StrategyKind::ColorFlooder),
            "desync_inserter" => Ok(StrategyKind::DesyncInserter),
            "eval_suppressor" => Ok(StrategyKind::EvalSuppressor),
            "adaptive_greedy" => Ok(StrategyKind::AdaptiveGreedy),
            other => Err(format!("unknown adversary strategy '{other}'")),
        }
    }
}

/// Per-strategy tuning knobs, read from the config file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StrategyParams {
    /// Color targeted by `color_flooder` (and tie-break for the assassin).
    pub target_color: bool,
    /// Round offset used by `desync_inserter`; defaults to half an epoch.
    pub round_offset: Option<u32>,
    /// Per-epoch cap on `desync_inserter` insertions; defaults to the budget.
    pub epoch_cap: Option<u64>,
    /// Epoch after which `desync_inserter` stops injecting.
    pub stop_epoch: Option<u64>,
}

/// The modal `round` value over a snapshot of main-protocol agents.
fn modal_round(snapshot: &Snapshot<'_, AgentState>) -> Option<u32> {
    let mut counts: HashMap<u32, u64> = HashMap::new();
    for (_, s) in snapshot.iter() {
        *counts.entry(s.round).or_default() += 1;
    }
    // Ties break toward the smaller round value for determinism.
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(round, _)| round)
}

/// Does nothing, ever.
pub struct NullStrategy;

impl<S> Strategy<S> for NullStrategy {
    fn name(&self) -> &'static str {
        "null"
    }

    fn act(&self, _: &Snapshot<'_, S>, _: u64, _: &mut CoinStream) -> Vec<AdversaryOp<S>> {
        Vec::new()
    }
}

/// Deletes `budget` distinct agents chosen uniformly at random each round.
pub struct UniformDeleter;

impl<S> Strategy<S> for UniformDeleter {
    fn name(&self) -> &'static str {
        "uniform_deleter"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, S>,
        budget: u64,
        rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<S>> {
        let m = snapshot.len();
        let k = (budget as usize).min(m);
        if k == 0 {
            return Vec::new();
        }
        let handles: Vec<AgentHandle> = snapshot.iter().map(|(h, _)| h).collect();
        index_sample(rng.rng_mut(), m, k)
            .into_iter()
            .map(|i| AdversaryOp::Delete(handles[i]))
            .collect()
    }
}

/// Deletes freshly selected leaders of the minority color, right after the
/// leader-selection round (modal round value 1). The point of the attack is
/// to skew the color distribution as hard as the budget allows.
pub struct LeaderAssassin {
    pub tie_break_color: bool,
}

impl Strategy<AgentState> for LeaderAssassin {
    fn name(&self) -> &'static str {
        "leader_assassin"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, AgentState>,
        budget: u64,
        _rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<AgentState>> {
        if modal_round(snapshot) != Some(1) {
            return Vec::new();
        }
        let mut by_color = [0u64; 2];
        for (_, s) in snapshot.iter() {
            if s.am_active {
                by_color[usize::from(s.color)] += 1;
            }
        }
        let target = match (by_color[0], by_color[1]) {
            (0, 0) => return Vec::new(),
            (0, _) => true,
            (_, 0) => false,
            (c0, c1) if c0 < c1 => false,
            (c0, c1) if c1 < c0 => true,
            _ => self.tie_break_color,
        };
        snapshot
            .iter()
            .filter(|(_, s)| s.am_active && s.color == target)
            .take(budget as usize)
            .map(|(h, _)| AdversaryOp::Delete(h))
            .collect()
    }
}

/// Inserts fully armed recruiters of one fixed color during the first rounds
/// of an epoch (modal round value 0 or 1), impersonating leaders.
pub struct ColorFlooder {
    pub color: bool,
    pub half_log2_n: u32,
}

impl Strategy<AgentState> for ColorFlooder {
    fn name(&self) -> &'static str {
        "color_flooder"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, AgentState>,
        budget: u64,
        _rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<AgentState>> {
        let Some(modal) = modal_round(snapshot) else {
            return Vec::new();
        };
        if modal > 1 {
            return Vec::new();
        }
        let state = AgentState {
            round: modal,
            am_active: true,
            color: self.color,
            recruiting: true,
            to_recruit: self.half_log2_n as i32,
        };
        (0..budget).map(|_| AdversaryOp::Insert(state)).collect()
    }
}

/// Inserts agents whose round counter is offset from the majority's,
/// exercising the round-consistency purge. Injection happens at the first
/// round of each epoch, capped per epoch, optionally stopping after a
/// configured epoch.
pub struct DesyncInserter {
    pub epoch_length: u32,
    /// Offset added to the majority round; half an epoch maximizes the time
    /// to the first evaluation-indicator collision.
    pub offset: u32,
    pub epoch_cap: u64,
    pub stop_epoch: Option<u64>,
}

impl Strategy<AgentState> for DesyncInserter {
    fn name(&self) -> &'static str {
        "desync_inserter"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, AgentState>,
        budget: u64,
        _rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<AgentState>> {
        let t = u64::from(self.epoch_length);
        let epoch = snapshot.round_index() / t;
        if !snapshot.round_index().is_multiple_of(t) {
            return Vec::new();
        }
        if self.stop_epoch.is_some_and(|stop| epoch >= stop) {
            return Vec::new();
        }
        let modal = modal_round(snapshot).unwrap_or(0);
        let state = AgentState {
            round: (modal + self.offset) % self.epoch_length,
            am_active: false,
            color: false,
            recruiting: false,
            to_recruit: 0,
        };
        let count = budget.min(self.epoch_cap);
        (0..count).map(|_| AdversaryOp::Insert(state)).collect()
    }
}

/// Deletes active agents at the entry of the evaluation round, suppressing
/// splits the population was about to earn.
pub struct EvalSuppressor {
    pub epoch_length: u32,
}

impl Strategy<AgentState> for EvalSuppressor {
    fn name(&self) -> &'static str {
        "eval_suppressor"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, AgentState>,
        budget: u64,
        rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<AgentState>> {
        if modal_round(snapshot) != Some(self.epoch_length - 1) {
            return Vec::new();
        }
        let actives: Vec<AgentHandle> = snapshot
            .iter()
            .filter(|(_, s)| s.am_active)
            .map(|(h, _)| h)
            .collect();
        let k = (budget as usize).min(actives.len());
        if k == 0 {
            return Vec::new();
        }
        index_sample(rng.rng_mut(), actives.len(), k)
            .into_iter()
            .map(|i| AdversaryOp::Delete(actives[i]))
            .collect()
    }
}

/// Per round, evaluates every other built-in template and plays the op list
/// with the largest one-step population-drift estimate. The estimate is the
/// direct insert/delete displacement plus, at the evaluation round, the
/// expected net change of the evaluation itself given the altered color
/// counts.
pub struct AdaptiveGreedy {
    params: SimParams,
    templates: Vec<Box<dyn Strategy<AgentState>>>,
}

impl AdaptiveGreedy {
    pub fn new(params: SimParams, strategy_params: &StrategyParams) -> Self {
        let templates = vec![
            build_main_strategy(StrategyKind::UniformDeleter, &params, strategy_params),
            build_main_strategy(StrategyKind::LeaderAssassin, &params, strategy_params),
            build_main_strategy(StrategyKind::ColorFlooder, &params, strategy_params),
            build_main_strategy(StrategyKind::DesyncInserter, &params, strategy_params),
            build_main_strategy(StrategyKind::EvalSuppressor, &params, strategy_params),
        ];
        AdaptiveGreedy { params, templates }
    }

    /// Expected |population change| of the upcoming round if `ops` were
    /// applied to the snapshot.
    fn score(
        &self,
        snapshot: &Snapshot<'_, AgentState>,
        ops: &[AdversaryOp<AgentState>],
    ) -> f64 {
        let mut deletes_by_color = [0i64; 2];
        let mut direct = 0i64;
        let mut inserted_by_color = [0i64; 2];
        let by_handle: HashMap<AgentHandle, &AgentState> = snapshot.iter().collect();
        for op in ops {
            match op {
                AdversaryOp::Delete(h) => {
                    direct -= 1;
                    if let Some(s) = by_handle.get(h) {
                        if s.am_active {
                            deletes_by_color[usize::from(s.color)] += 1;
                        }
                    }
                }
                AdversaryOp::Insert(s) => {
                    direct += 1;
                    if s.am_active {
                        inserted_by_color[usize::from(s.color)] += 1;
                    }
                }
                AdversaryOp::Modify(h, s) => {
                    if let Some(old) = by_handle.get(h) {
                        if old.am_active {
                            deletes_by_color[usize::from(old.color)] += 1;
                        }
                    }
                    if s.am_active {
                        inserted_by_color[usize::from(s.color)] += 1;
                    }
                }
            }
        }
        let t = self.params.epoch_length;
        if modal_round(snapshot) != Some(t - 1) {
            return direct.unsigned_abs() as f64;
        }
        // Evaluation is about to run: estimate its expected net change from
        // the post-op active color counts.
        let mut active = [0i64; 2];
        let mut m = snapshot.len() as i64;
        for (_, s) in snapshot.iter() {
            if s.am_active && s.round == t - 1 {
                active[usize::from(s.color)] += 1;
            }
        }
        m += direct;
        let a0 = (active[0] - deletes_by_color[0] + inserted_by_color[0]).max(0) as f64;
        let a1 = (active[1] - deletes_by_color[1] + inserted_by_color[1]).max(0) as f64;
        let m = m.max(2) as f64;
        let gamma = *self.params.gamma.numer() as f64 / *self.params.gamma.denom() as f64;
        let pairs = (gamma * m / 2.0).floor();
        let total_pairs = m * (m - 1.0) / 2.0;
        let p_same = (a0 * (a0 - 1.0) / 2.0 + a1 * (a1 - 1.0) / 2.0) / total_pairs;
        let p_diff = a0 * a1 / total_pairs;
        let p_split = 1.0 - 0.5f64.powi(self.params.split_exponent as i32);
        let eval_delta = pairs * (2.0 * p_same * p_split - 2.0 * p_diff);
        (direct as f64 + eval_delta).abs()
    }
}

impl Strategy<AgentState> for AdaptiveGreedy {
    fn name(&self) -> &'static str {
        "adaptive_greedy"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, AgentState>,
        budget: u64,
        rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<AgentState>> {
        // Every template sees an identical clone of this round's stream, so
        // the choice is a pure function of the snapshot.
        let mut best: Option<(f64, Vec<AdversaryOp<AgentState>>)> = None;
        for template in &self.templates {
            let ops = template.act(snapshot, budget, &mut rng.clone());
            let score = self.score(snapshot, &ops);
            let better = match &best {
                None => true,
                Some((s, _)) => score > *s,
            };
            if better {
                best = Some((score, ops));
            }
        }
        best.map(|(_, ops)| ops).unwrap_or_default()
    }
}

/// Build a main-protocol strategy by kind.
pub fn build_main_strategy(
    kind: StrategyKind,
    params: &SimParams,
    sp: &StrategyParams,
) -> Box<dyn Strategy<AgentState>> {
    match kind {
        StrategyKind::Null => Box::new(NullStrategy),
        StrategyKind::UniformDeleter => Box::new(UniformDeleter),
        StrategyKind::LeaderAssassin => Box::new(LeaderAssassin {
            tie_break_color: sp.target_color,
        }),
        StrategyKind::ColorFlooder => Box::new(ColorFlooder {
            color: sp.target_color,
            half_log2_n: params.half_log2_n(),
        }),
        StrategyKind::DesyncInserter => Box::new(DesyncInserter {
            epoch_length: params.epoch_length,
            offset: sp.round_offset.unwrap_or(params.epoch_length / 2),
            epoch_cap: sp.epoch_cap.unwrap_or(params.adversary_budget),
            stop_epoch: sp.stop_epoch,
        }),
        StrategyKind::EvalSuppressor => Box::new(EvalSuppressor {
            epoch_length: params.epoch_length,
        }),
        StrategyKind::AdaptiveGreedy => Box::new(AdaptiveGreedy::new(params.clone(), sp)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agent::GhostMeta;
    use crate::params::{validate_and_derive, RawSimParams, Rational};

    fn params(n: u64, budget: u64) -> SimParams {
        validate_and_derive(&RawSimParams {
            n_target: n,
            gamma: Rational::new(1, 2),
            adversary_budget: budget,
            alpha: Rational::new(1, 10),
            t_inner: None,
        })
        .unwrap()
    }

    fn records(states: Vec<AgentState>) -> Vec<AgentRecord<AgentState>> {
        states
            .into_iter()
            .enumerate()
            .map(|(i, state)| AgentRecord {
                handle: AgentHandle(i as u64),
                state,
                meta: GhostMeta::protocol_birth(0),
            })
            .collect()
    }

    fn st(round: u32, active: bool, color: bool) -> AgentState {
        AgentState {
            round,
            am_active: active,
            color,
            recruiting: active,
            to_recruit: 0,
        }
    }

    #[test]
    fn null_strategy_is_a_no_op() {
        let recs = records(vec![st(0, false, false); 4]);
        let snap = Snapshot::new(0, &recs, &[], None);
        let ops =
            <NullStrategy as Strategy<AgentState>>::act(&NullStrategy, &snap, 10, &mut CoinStream::from_seed_u64(0));
        assert!(ops.is_empty());
    }

    #[test]
    fn assassin_targets_the_only_present_color() {
        let p = params(1 << 16, 4);
        let mut states = vec![st(1, false, false); 60];
        states.extend(vec![st(1, true, true); 32]);
        let recs = records(states);
        let snap = Snapshot::new(1, &recs, &[], None);
        let assassin = LeaderAssassin {
            tie_break_color: false,
        };
        let ops = assassin.act(&snap, p.adversary_budget, &mut CoinStream::from_seed_u64(1));
        assert_eq!(ops.len(), 4);
        for op in &ops {
            let AdversaryOp::Delete(h) = op else {
                panic!("assassin only deletes")
            };
            let rec = recs.iter().find(|r| r.handle == *h).unwrap();
            assert!(rec.state.am_active && rec.state.color);
        }
    }

    #[test]
    fn assassin_prefers_the_minority_color() {
        let mut states = vec![st(1, false, false); 50];
        states.extend(vec![st(1, true, false); 10]);
        states.extend(vec![st(1, true, true); 3]);
        let recs = records(states);
        let snap = Snapshot::new(1, &recs, &[], None);
        let assassin = LeaderAssassin {
            tie_break_color: false,
        };
        let ops = assassin.act(&snap, 8, &mut CoinStream::from_seed_u64(1));
        assert_eq!(ops.len(), 3, "only three minority actives exist");
    }

    #[test]
    fn assassin_waits_for_the_post_selection_round() {
        let recs = records(vec![st(5, true, true); 8]);
        let snap = Snapshot::new(5, &recs, &[], None);
        let assassin = LeaderAssassin {
            tie_break_color: false,
        };
        assert!(assassin
            .act(&snap, 8, &mut CoinStream::from_seed_u64(1))
            .is_empty());
    }

    #[test]
    fn desync_inserts_half_epoch_offset_at_epoch_start() {
        let p = params(1 << 16, 2);
        let strat = DesyncInserter {
            epoch_length: p.epoch_length,
            offset: p.epoch_length / 2,
            epoch_cap: 2,
            stop_epoch: None,
        };
        let recs = records(vec![st(0, false, false); 16]);
        let snap = Snapshot::new(2 * u64::from(p.epoch_length), &recs, &[], None);
        let ops = strat.act(&snap, 2, &mut CoinStream::from_seed_u64(0));
        assert_eq!(ops.len(), 2);
        for op in &ops {
            let AdversaryOp::Insert(s) = op else {
                panic!("desync only inserts")
            };
            assert_eq!(s.round, p.epoch_length / 2);
        }
        // Mid-epoch rounds are quiet.
        let snap = Snapshot::new(2 * u64::from(p.epoch_length) + 7, &recs, &[], None);
        assert!(strat.act(&snap, 2, &mut CoinStream::from_seed_u64(0)).is_empty());
        // After the stop epoch, nothing.
        let stopped = DesyncInserter {
            stop_epoch: Some(2),
            ..strat
        };
        let snap = Snapshot::new(2 * u64::from(p.epoch_length), &recs, &[], None);
        assert!(stopped.act(&snap, 2, &mut CoinStream::from_seed_u64(0)).is_empty());
    }

    #[test]
    fn every_builtin_respects_the_budget() {
        let p = params(1 << 12, 3);
        let sp = StrategyParams::default();
        let kinds = [
            StrategyKind::Null,
            StrategyKind::UniformDeleter,
            StrategyKind::LeaderAssassin,
            StrategyKind::ColorFlooder,
            StrategyKind::DesyncInserter,
            StrategyKind::EvalSuppressor,
            StrategyKind::AdaptiveGreedy,
        ];
        // A few structurally different snapshots at different epoch positions.
        let variants: Vec<(u64, Vec<AgentState>)> = vec![
            (0, vec![st(0, false, false); 10]),
            (1, {
                let mut v = vec![st(1, true, false); 5];
                v.extend(vec![st(1, true, true); 5]);
                v.extend(vec![st(1, false, false); 20]);
                v
            }),
            (u64::from(p.epoch_length) - 1, {
                let mut v = vec![st(p.epoch_length - 1, true, false); 6];
                v.extend(vec![st(p.epoch_length - 1, false, false); 6]);
                v
            }),
            (7, vec![]),
        ];
        for kind in kinds {
            let strat = build_main_strategy(kind, &p, &sp);
            for (round, states) in &variants {
                for budget in [0u64, 1, 3] {
                    let recs = records(states.clone());
                    let snap = Snapshot::new(*round, &recs, &[], None);
                    let ops = strat.act(&snap, budget, &mut CoinStream::from_seed_u64(9));
                    assert!(
                        ops.len() as u64 <= budget,
                        "{} exceeded budget {budget} with {} ops",
                        strat.name(),
                        ops.len()
                    );
                }
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(192))]

        /// Every built-in strategy stays within budget on arbitrary
        /// snapshots at arbitrary rounds.
        #[test]
        fn strategies_respect_budget_on_random_snapshots(
            raw_states in proptest::collection::vec(
                (0u32..864, proptest::bool::ANY, proptest::bool::ANY, proptest::bool::ANY),
                0..80,
            ),
            round in 0u64..2000,
            budget in 0u64..6,
            seed in proptest::num::u64::ANY,
            kind_idx in 0usize..7,
        ) {
            let p = params(1 << 12, budget);
            let kinds = [
                StrategyKind::Null,
                StrategyKind::UniformDeleter,
                StrategyKind::LeaderAssassin,
                StrategyKind::ColorFlooder,
                StrategyKind::DesyncInserter,
                StrategyKind::EvalSuppressor,
                StrategyKind::AdaptiveGreedy,
            ];
            let strategy = build_main_strategy(kinds[kind_idx], &p, &StrategyParams::default());
            let recs = records(
                raw_states
                    .into_iter()
                    .map(|(round, am_active, color, recruiting)| AgentState {
                        round,
                        am_active,
                        color,
                        recruiting,
                        to_recruit: 0,
                    })
                    .collect(),
            );
            let snap = Snapshot::new(round, &recs, &[], None);
            let ops = strategy.act(&snap, budget, &mut CoinStream::from_seed_u64(seed));
            proptest::prop_assert!(ops.len() as u64 <= budget);
        }
    }

    #[test]
    fn strategies_are_deterministic() {
        let p = params(1 << 12, 3);
        let sp = StrategyParams::default();
        let mut states = vec![st(p.epoch_length - 1, true, false); 6];
        states.extend(vec![st(p.epoch_length - 1, false, false); 26]);
        let recs = records(states);
        for kind in [
            StrategyKind::UniformDeleter,
            StrategyKind::EvalSuppressor,
            StrategyKind::AdaptiveGreedy,
        ] {
            let strat = build_main_strategy(kind, &p, &sp);
            let snap = Snapshot::new(u64::from(p.epoch_length) - 1, &recs, &[], None);
            let a = strat.act(&snap, 3, &mut CoinStream::from_seed_u64(4));
            let b = strat.act(&snap, 3, &mut CoinStream::from_seed_u64(4));
            assert_eq!(a, b, "{} not deterministic", strat.name());
        }
    }
}
