//! The round loop: adversary, matching, message exchange, per-agent steps,
//! applying splits and deaths, metrics, and the win-condition check.
//!
//! Rounds are strictly sequential. Within a round the per-agent steps are
//! embarrassingly parallel: every agent reads only its own state and its
//! immutable incoming message, draws coins from a stream pre-keyed by
//! `(seed, round, handle)`, and writes only its own successor record. The
//! engine merges results in population order, so the trajectory is
//! byte-identical for any thread count.

use crate::adversary::{AdversaryOp, Snapshot, Strategy, StrategyKind, StrategyParams};
use crate::agent::{AgentHandle, AgentRecord, GhostMeta};
use crate::baselines::{baseline_strategy, BaselineConfig, BaselineProtocol};
use crate::params::SimParams;
use crate::protocol::{AgentAction, MainProtocol, Mutation};
use crate::rng::{seed_streams, CoinStream, StreamPurpose};
use crate::scheduler::{sample_pairs_in_place, MatchFraction};
use rayon::prelude::*;
use std::collections::{HashMap, HashSet};
use std::hash::Hash;
use thiserror::Error;

/// Default population size above which per-agent steps run in parallel.
/// Below it the per-round fork/join overhead outweighs the step work.
pub const DEFAULT_PARALLEL_THRESHOLD: usize = 200_000;

/// A per-agent protocol the engine can run. Implementations must be pure:
/// `step` may depend only on its arguments.
pub trait Protocol: Sync {
    type State: Clone + Send + Sync + PartialEq + Hash + std::fmt::Debug;
    type Wire: Copy + Send + Sync;

    fn initial_state(&self) -> Self::State;
    fn encode(&self, state: &Self::State) -> Self::Wire;
    fn step(
        &self,
        state: &Self::State,
        nbr: Option<Self::Wire>,
        coins: &mut CoinStream,
    ) -> (Self::State, AgentAction);

    /// Clamp adversary-inserted states into the representable domain.
    fn normalize_inserted(&self, _state: &mut Self::State) {}

    /// The epoch length, when the protocol has an epoch structure. Epoch
    /// observations and cluster tracking are only maintained when this is
    /// `Some`.
    fn epoch_length(&self) -> Option<u32> {
        None
    }

    /// Observer hooks; metrics only, never consulted for stepping.
    fn round_of(&self, state: &Self::State) -> u32;
    fn is_active(&self, _state: &Self::State) -> bool {
        false
    }
    fn color_of(&self, _state: &Self::State) -> Option<bool> {
        None
    }
    fn to_recruit_of(&self, _state: &Self::State) -> i32 {
        0
    }

    /// Classify a death: `true` when it came from the round-consistency
    /// check rather than the evaluation decision.
    fn death_is_consistency(&self, _state: &Self::State, _nbr: Option<Self::Wire>) -> bool {
        false
    }

    /// How the agent's cluster membership changes across a step.
    fn cluster_transition(
        &self,
        _pre: &Self::State,
        _post: &Self::State,
    ) -> ClusterTransition {
        ClusterTransition::Keep
    }
}

/// Cluster-membership change of one agent over one step, as observed by the
/// engine for GhostMeta bookkeeping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClusterTransition {
    /// Membership unchanged.
    Keep,
    /// The agent founded a new cluster (fresh leader).
    Found,
    /// The agent joined its matched partner's cluster (it was recruited).
    InheritFromPartner,
    /// The agent left its cluster (evaluation reset).
    Clear,
}

/// Which per-agent program a run executes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProtocolKind {
    #[default]
    Main,
    Attempt1,
    Attempt2,
}

impl ProtocolKind {
    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Main => "main",
            ProtocolKind::Attempt1 => "attempt1",
            ProtocolKind::Attempt2 => "attempt2",
        }
    }
}

impl std::str::FromStr for ProtocolKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "main" => Ok(ProtocolKind::Main),
            "attempt1" => Ok(ProtocolKind::Attempt1),
            "attempt2" => Ok(ProtocolKind::Attempt2),
            other => Err(format!("unknown protocol '{other}'")),
        }
    }
}

/// Everything a single run needs beyond the protocol parameters.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: SimParams,
    pub seed: u64,
    pub max_rounds: u64,
    pub protocol: ProtocolKind,
    pub strategy: StrategyKind,
    pub strategy_params: StrategyParams,
    pub match_fraction: MatchFraction,
    /// Starting population; defaults to `params.n_target`. Overridden for
    /// drift experiments; overridden agents start in the all-zero state.
    pub initial_population: u64,
    pub stop_on_violation: bool,
    /// Retain a full population snapshot per round for the adversary's
    /// history access. Off by default for memory reasons.
    pub keep_history: bool,
    pub mutation: Mutation,
    pub baseline: BaselineConfig,
    /// Populations at least this large step in parallel when the worker pool
    /// has more than one thread. Purely a performance knob: trajectories are
    /// identical for every threshold and thread count.
    pub step_parallel_threshold: usize,
}

impl RunConfig {
    pub fn new(params: SimParams, seed: u64, max_rounds: u64) -> Self {
        RunConfig {
            initial_population: params.n_target,
            params,
            seed,
            max_rounds,
            protocol: ProtocolKind::Main,
            strategy: StrategyKind::Null,
            strategy_params: StrategyParams::default(),
            match_fraction: MatchFraction::Exact,
            stop_on_violation: false,
            keep_history: false,
            mutation: Mutation::None,
            baseline: BaselineConfig::default(),
            step_parallel_threshold: DEFAULT_PARALLEL_THRESHOLD,
        }
    }

    /// Convenience: run whole epochs of the main protocol.
    pub fn for_epochs(params: SimParams, seed: u64, epochs: u64) -> Self {
        let rounds = epochs * u64::from(params.epoch_length);
        Self::new(params, seed, rounds)
    }
}

/// Per-round metric row; one CSV line per round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundOutcome {
    pub round_index: u64,
    /// Live agents at the end of the round.
    pub population_size: u64,
    pub births: u64,
    pub deaths_eval: u64,
    pub deaths_consistency: u64,
    pub adversary_inserts: u64,
    pub adversary_deletes: u64,
    pub adversary_modifies: u64,
    /// Whether the end-of-round size lies outside [(1-alpha)N, (1+alpha)N].
    pub violation: bool,
}

/// Cheap per-round observer metrics (main protocol runs only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RoundObservation {
    pub size: u64,
    pub active: u64,
    /// Agents whose round counter differs from the modal value.
    pub wrong_round: u64,
    pub modal_round: u32,
}

/// Snapshot taken at the entry of an evaluation round, after the adversary
/// acted and the matching was drawn, before any step executes. Counts cover
/// agents whose round counter actually sits at the evaluation round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalObservation {
    pub colored_by_color: (u64, u64),
    /// Active agents in clusters untouched by the adversary this epoch.
    pub honest_colored: u64,
    /// Active agents in adversary-touched (or unattributable) clusters.
    pub adversary_touched_colored: u64,
    pub matched_pairs: u64,
    /// Active agents entering evaluation with a leftover recruitment
    /// obligation, excluding agents the adversary inserted this epoch.
    pub to_recruit_nonzero: u64,
}

/// Per-epoch observer data accumulated by the engine.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EpochObservation {
    pub epoch_index: u64,
    /// Population entering the epoch, before the epoch's first adversary op.
    pub start_size: u64,
    /// Active agents by color right after the leader-selection round.
    pub leaders_by_color: Option<(u64, u64)>,
    pub eval: Option<EvalObservation>,
}

/// Everything a finished (or aborted-by-violation-stop) run reports.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub outcomes: Vec<RoundOutcome>,
    /// Per-round observations; empty for baseline protocols.
    pub observations: Vec<RoundObservation>,
    /// Per-epoch observations; empty for baseline protocols.
    pub epochs: Vec<EpochObservation>,
    pub initial_size: u64,
    pub final_size: u64,
    pub first_violation_round: Option<u64>,
}

/// Engine-level failures. A budget violation aborts the run loudly: it is a
/// strategy bug, not an adversary win.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EngineError {
    #[error("adversary returned {returned} ops with budget {budget} in round {round}")]
    BudgetExceeded {
        round: u64,
        returned: usize,
        budget: u64,
    },
    #[error("strategy '{strategy}' is not available for protocol '{protocol}'")]
    UnsupportedStrategy {
        strategy: &'static str,
        protocol: &'static str,
    },
}

/// A live simulation. Construct with [`Simulation::new`], then call
/// [`Simulation::run_round`] until done, or use [`run_with_protocol`].
pub struct Simulation<'p, P: Protocol> {
    proto: &'p P,
    strategy: &'p dyn Strategy<P::State>,
    seed: u64,
    gamma: crate::params::Rational,
    match_fraction: MatchFraction,
    budget: u64,
    bounds: (u64, u64),
    keep_history: bool,
    parallel_threshold: usize,
    round_index: u64,
    population: Vec<AgentRecord<P::State>>,
    next_handle: u64,
    next_cluster: u64,
    /// Clusters touched by the adversary in the current epoch.
    taints: HashSet<u64>,
    record: RunRecord,
    history: Vec<Vec<(AgentHandle, P::State)>>,
    // Scratch buffers reused across rounds.
    order: Vec<u32>,
    partner: Vec<u32>,
    wires: Vec<P::Wire>,
    results: Vec<(P::State, AgentAction)>,
    pre_clusters: Vec<Option<u64>>,
    dead: Vec<u32>,
    split_parents: Vec<u32>,
    daughters: Vec<AgentRecord<P::State>>,
    round_hist: Vec<u32>,
}

impl<'p, P: Protocol> Simulation<'p, P> {
    pub fn new(proto: &'p P, strategy: &'p dyn Strategy<P::State>, cfg: &RunConfig) -> Self {
        assert!(cfg.max_rounds >= 1, "max_rounds must be at least 1");
        let initial = cfg.initial_population;
        let population: Vec<AgentRecord<P::State>> = (0..initial)
            .map(|i| AgentRecord {
                handle: AgentHandle(i),
                state: proto.initial_state(),
                meta: GhostMeta::protocol_birth(0),
            })
            .collect();
        let hist_len = proto.epoch_length().map_or(0, |t| t as usize);
        Simulation {
            proto,
            strategy,
            seed: cfg.seed,
            gamma: cfg.params.gamma,
            match_fraction: cfg.match_fraction,
            budget: cfg.params.adversary_budget,
            bounds: cfg.params.violation_bounds(),
            keep_history: cfg.keep_history,
            parallel_threshold: cfg.step_parallel_threshold,
            round_index: 0,
            population,
            next_handle: initial,
            next_cluster: 0,
            taints: HashSet::new(),
            record: RunRecord {
                outcomes: Vec::new(),
                observations: Vec::new(),
                epochs: Vec::new(),
                initial_size: initial,
                final_size: initial,
                first_violation_round: None,
            },
            history: Vec::new(),
            order: Vec::new(),
            partner: Vec::new(),
            wires: Vec::new(),
            results: Vec::new(),
            pre_clusters: Vec::new(),
            dead: Vec::new(),
            split_parents: Vec::new(),
            daughters: Vec::new(),
            round_hist: vec![0; hist_len],
        }
    }

    pub fn round_index(&self) -> u64 {
        self.round_index
    }

    pub fn population(&self) -> &[AgentRecord<P::State>] {
        &self.population
    }

    #[cfg(debug_assertions)]
    fn population_hash(&self) -> u64 {
        use std::hash::Hasher;
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for rec in &self.population {
            rec.handle.0.hash(&mut h);
            rec.state.hash(&mut h);
        }
        h.finish()
    }

    /// Execute one round; returns its metric row.
    pub fn run_round(&mut self) -> Result<RoundOutcome, EngineError> {
        let round = self.round_index;
        let epoch_len = self.proto.epoch_length();
        let pos = epoch_len.map(|t| (round % u64::from(t)) as u32);

        // New epoch: reset taint tracking, open an observation record.
        if pos == Some(0) {
            self.taints.clear();
            self.record.epochs.push(EpochObservation {
                epoch_index: round / u64::from(epoch_len.unwrap()),
                start_size: self.population.len() as u64,
                leaders_by_color: None,
                eval: None,
            });
        }
        let size_at_start = self.population.len() as u64;

        // (1) Adversary acts on a read-only snapshot, before the matching
        // is drawn and before any protocol coin is flipped.
        let mut inserts = 0u64;
        let mut deletes = 0u64;
        let mut modifies = 0u64;
        {
            let mut arng = seed_streams(self.seed, round, StreamPurpose::Adversary);
            let snapshot = Snapshot::new(
                round,
                &self.population,
                &self.record.outcomes,
                self.keep_history.then_some(self.history.as_slice()),
            );
            // Guard against strategies that mutate state behind the
            // read-only interface; auditing the first rounds of every run
            // catches that without a per-round hashing bill.
            #[cfg(debug_assertions)]
            let hash_before = (round < 16).then(|| self.population_hash());
            let ops = self.strategy.act(&snapshot, self.budget, &mut arng);
            #[cfg(debug_assertions)]
            if let Some(h) = hash_before {
                debug_assert_eq!(h, self.population_hash(), "strategy mutated the population");
            }
            if ops.len() as u64 > self.budget {
                return Err(EngineError::BudgetExceeded {
                    round,
                    returned: ops.len(),
                    budget: self.budget,
                });
            }
            if !ops.is_empty() {
                (inserts, deletes, modifies) = self.apply_ops(ops, round);
            }
        }

        // (2) Random matching over the survivors. The shuffled suffix of
        // `order` is the matched set, paired consecutively.
        let m = self.population.len();
        self.order.clear();
        self.order.extend(0..m as u32);
        let mut mrng = seed_streams(self.seed, round, StreamPurpose::Matching);
        let k = sample_pairs_in_place(&mut self.order, self.gamma, self.match_fraction, &mut mrng);
        self.partner.clear();
        self.partner.resize(m, u32::MAX);
        for c in self.order[m - k..].chunks_exact(2) {
            self.partner[c[0] as usize] = c[1];
            self.partner[c[1] as usize] = c[0];
        }
        #[cfg(debug_assertions)]
        {
            // Matching invariants: pairs disjoint, no self-pairing, exactly
            // k agents matched.
            let mut matched = 0usize;
            for (i, &p) in self.partner.iter().enumerate() {
                if p != u32::MAX {
                    matched += 1;
                    debug_assert_ne!(p as usize, i, "self-pairing in round {round}");
                    debug_assert_eq!(
                        self.partner[p as usize] as usize, i,
                        "partner map not symmetric in round {round}"
                    );
                }
            }
            debug_assert_eq!(matched, k);
        }

        // Evaluation-entry observation, before any step executes.
        if pos.is_some() && pos == epoch_len.map(|t| t - 1) {
            let eval = self.observe_eval_entry(round, epoch_len.unwrap(), (k / 2) as u64);
            if let Some(ep) = self.record.epochs.last_mut() {
                ep.eval = Some(eval);
            }
        }

        // (3) Encode, (4) step every agent, (5) apply deaths and splits.
        let (births, deaths_eval, deaths_consistency, active) =
            self.step_and_apply(round, pos.is_some());

        // (6) Post-round observations and the metric row.
        let new_size = self.population.len() as u64;
        let deaths = deaths_eval + deaths_consistency;
        assert_eq!(
            new_size,
            size_at_start + inserts + births - deletes - deaths,
            "population conservation violated in round {round}"
        );
        if let Some(pos) = pos {
            self.observe_round(pos, active);
        }
        let violation = new_size < self.bounds.0 || new_size > self.bounds.1;
        if violation && self.record.first_violation_round.is_none() {
            self.record.first_violation_round = Some(round);
        }
        if self.keep_history {
            self.history.push(
                self.population
                    .iter()
                    .map(|r| (r.handle, r.state.clone()))
                    .collect(),
            );
        }
        let outcome = RoundOutcome {
            round_index: round,
            population_size: new_size,
            births,
            deaths_eval,
            deaths_consistency,
            adversary_inserts: inserts,
            adversary_deletes: deletes,
            adversary_modifies: modifies,
            violation,
        };
        self.record.outcomes.push(outcome);
        self.record.final_size = new_size;
        self.round_index += 1;
        Ok(outcome)
    }

    /// Apply adversary ops in order. Deletes and modifies address the
    /// pre-insert population; inserts are appended afterwards. Ops on dead
    /// handles are skipped (their budget is already spent).
    fn apply_ops(
        &mut self,
        ops: Vec<AdversaryOp<P::State>>,
        round: u64,
    ) -> (u64, u64, u64) {
        let mut by_handle: HashMap<u64, usize> = HashMap::with_capacity(self.population.len());
        for (i, rec) in self.population.iter().enumerate() {
            by_handle.insert(rec.handle.0, i);
        }
        let mut dead: HashSet<usize> = HashSet::new();
        let mut pending: Vec<AgentRecord<P::State>> = Vec::new();
        let (mut inserts, mut deletes, mut modifies) = (0u64, 0u64, 0u64);
        for op in ops {
            match op {
                AdversaryOp::Delete(h) => match by_handle.get(&h.0) {
                    Some(&i) if !dead.contains(&i) => {
                        if let Some(c) = self.population[i].meta.cluster_id {
                            self.taints.insert(c);
                        }
                        dead.insert(i);
                        deletes += 1;
                    }
                    _ => log::debug!("adversary delete of unknown handle {h} skipped"),
                },
                AdversaryOp::Insert(mut state) => {
                    self.proto.normalize_inserted(&mut state);
                    let cluster_id = self.proto.is_active(&state).then(|| {
                        let c = self.next_cluster;
                        self.next_cluster += 1;
                        self.taints.insert(c);
                        c
                    });
                    let handle = AgentHandle(self.next_handle);
                    self.next_handle += 1;
                    pending.push(AgentRecord {
                        handle,
                        state,
                        meta: GhostMeta {
                            cluster_id,
                            ..GhostMeta::adversary_birth(round)
                        },
                    });
                    inserts += 1;
                }
                AdversaryOp::Modify(h, mut state) => match by_handle.get(&h.0) {
                    Some(&i) if !dead.contains(&i) => {
                        self.proto.normalize_inserted(&mut state);
                        let rec = &mut self.population[i];
                        if let Some(c) = rec.meta.cluster_id {
                            self.taints.insert(c);
                        }
                        rec.state = state;
                        rec.meta.cluster_id = self.proto.is_active(&rec.state).then(|| {
                            let c = self.next_cluster;
                            self.next_cluster += 1;
                            self.taints.insert(c);
                            c
                        });
                        modifies += 1;
                    }
                    _ => log::debug!("adversary modify of unknown handle {h} skipped"),
                },
            }
        }
        if !dead.is_empty() {
            let mut i = 0;
            self.population.retain(|_| {
                let keep = !dead.contains(&i);
                i += 1;
                keep
            });
        }
        self.population.append(&mut pending);
        (inserts, deletes, modifies)
    }

    /// Encode everyone's wire message, step every agent, and apply the
    /// results in population order: states updated in place, dead agents
    /// removed, daughters appended at the end ordered by parent index.
    ///
    /// Peers are read exclusively through the pre-encoded wire buffer and
    /// cluster inheritance reads a pre-step snapshot, so results are
    /// independent of traversal order; on large populations with more than
    /// one worker thread the pure step computations run in parallel and the
    /// trajectory is identical either way. Returns
    /// `(births, deaths_eval, deaths_consistency, active_count)`.
    fn step_and_apply(&mut self, round: u64, observe: bool) -> (u64, u64, u64, u64) {
        let m = self.population.len();
        let proto = self.proto;
        let seed = self.seed;
        let use_parallel = m >= self.parallel_threshold && rayon::current_num_threads() > 1;

        self.wires.clear();
        if use_parallel {
            let pop = &self.population;
            (0..m)
                .into_par_iter()
                .with_min_len(4096)
                .map(|i| proto.encode(&pop[i].state))
                .collect_into_vec(&mut self.wires);
            let wires = &self.wires;
            let partner = &self.partner;
            (0..m)
                .into_par_iter()
                .with_min_len(4096)
                .map(|i| {
                    let nbr = match partner[i] {
                        u32::MAX => None,
                        p => Some(wires[p as usize]),
                    };
                    let mut coins = seed_streams(seed, round, StreamPurpose::Agent(pop[i].handle));
                    proto.step(&pop[i].state, nbr, &mut coins)
                })
                .collect_into_vec(&mut self.results);
        } else {
            let pop = &self.population;
            self.wires.extend(pop.iter().map(|r| proto.encode(&r.state)));
        }

        let track_clusters = proto.epoch_length().is_some();
        self.pre_clusters.clear();
        if track_clusters {
            self.pre_clusters
                .extend(self.population.iter().map(|r| r.meta.cluster_id));
        }
        if observe {
            self.round_hist.fill(0);
        }
        let hist_cap = self.round_hist.len().saturating_sub(1) as u32;
        self.dead.clear();
        self.split_parents.clear();
        let (mut deaths_eval, mut deaths_cons) = (0u64, 0u64);
        let mut active = 0u64;

        for i in 0..m {
            let nbr = match self.partner[i] {
                u32::MAX => None,
                p => Some(self.wires[p as usize]),
            };
            let (post, action) = if use_parallel {
                let slot = &self.results[i];
                (slot.0.clone(), slot.1)
            } else {
                let mut coins =
                    seed_streams(seed, round, StreamPurpose::Agent(self.population[i].handle));
                proto.step(&self.population[i].state, nbr, &mut coins)
            };
            if action == AgentAction::Die {
                if proto.death_is_consistency(&self.population[i].state, nbr) {
                    deaths_cons += 1;
                } else {
                    deaths_eval += 1;
                }
                self.dead.push(i as u32);
                continue;
            }
            if track_clusters {
                let rec = &self.population[i];
                let cluster = match proto.cluster_transition(&rec.state, &post) {
                    ClusterTransition::Keep => rec.meta.cluster_id,
                    ClusterTransition::Clear => None,
                    ClusterTransition::Found => {
                        let c = self.next_cluster;
                        self.next_cluster += 1;
                        Some(c)
                    }
                    ClusterTransition::InheritFromPartner => match self.partner[i] {
                        u32::MAX => None,
                        p => self.pre_clusters[p as usize],
                    },
                };
                self.population[i].meta.cluster_id = cluster;
            }
            if observe {
                self.round_hist[proto.round_of(&post).min(hist_cap) as usize] += 1;
                active += u64::from(proto.is_active(&post));
            }
            self.population[i].state = post;
            if action == AgentAction::Split {
                self.split_parents.push(i as u32);
            }
        }

        // Daughters carry a bit-identical copy of the parent's post-step
        // state and inherit its cluster.
        let births = self.split_parents.len() as u64;
        self.daughters.clear();
        for &i in &self.split_parents {
            let parent = &self.population[i as usize];
            let state = parent.state.clone();
            if observe {
                self.round_hist[proto.round_of(&state).min(hist_cap) as usize] += 1;
                active += u64::from(proto.is_active(&state));
            }
            let handle = AgentHandle(self.next_handle);
            self.next_handle += 1;
            self.daughters.push(AgentRecord {
                handle,
                state,
                meta: GhostMeta {
                    cluster_id: parent.meta.cluster_id,
                    inserted_by_adversary: false,
                    birth_round: round,
                },
            });
        }
        if !self.dead.is_empty() {
            let dead = &self.dead;
            let (mut di, mut idx) = (0usize, 0u32);
            self.population.retain(|_| {
                let is_dead = di < dead.len() && dead[di] == idx;
                if is_dead {
                    di += 1;
                }
                idx += 1;
                !is_dead
            });
        }
        self.population.append(&mut self.daughters);
        (births, deaths_eval, deaths_cons, active)
    }

    fn observe_eval_entry(&self, round: u64, t: u32, matched_pairs: u64) -> EvalObservation {
        let epoch_start = round - round % u64::from(t);
        let mut colored = (0u64, 0u64);
        let (mut honest, mut touched, mut pending) = (0u64, 0u64, 0u64);
        for rec in &self.population {
            if self.proto.round_of(&rec.state) != t - 1 || !self.proto.is_active(&rec.state) {
                continue;
            }
            match self.proto.color_of(&rec.state) {
                Some(false) => colored.0 += 1,
                Some(true) => colored.1 += 1,
                None => {}
            }
            match rec.meta.cluster_id {
                Some(c) if !self.taints.contains(&c) => honest += 1,
                _ => touched += 1,
            }
            let inserted_this_epoch =
                rec.meta.inserted_by_adversary && rec.meta.birth_round >= epoch_start;
            if self.proto.to_recruit_of(&rec.state) != 0 && !inserted_this_epoch {
                pending += 1;
            }
        }
        EvalObservation {
            colored_by_color: colored,
            honest_colored: honest,
            adversary_touched_colored: touched,
            matched_pairs,
            to_recruit_nonzero: pending,
        }
    }

    /// Finish the per-round observation from the histogram and active count
    /// accumulated in [`Self::step_and_apply`].
    fn observe_round(&mut self, pos: u32, active: u64) {
        let size = self.population.len() as u64;
        let modal_round = self
            .round_hist
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(r, _)| r as u32)
            .unwrap_or(0);
        let wrong_round = size - u64::from(self.round_hist[modal_round as usize]);
        self.record.observations.push(RoundObservation {
            size,
            active,
            wrong_round,
            modal_round,
        });

        // Leaders are observable right after the selection round: agents that
        // came out of round 0 active.
        if pos == 0 {
            let mut leaders = (0u64, 0u64);
            for rec in &self.population {
                if self.proto.round_of(&rec.state) == 1 && self.proto.is_active(&rec.state) {
                    match self.proto.color_of(&rec.state) {
                        Some(false) => leaders.0 += 1,
                        Some(true) => leaders.1 += 1,
                        None => {}
                    }
                }
            }
            if let Some(ep) = self.record.epochs.last_mut() {
                ep.leaders_by_color = Some(leaders);
            }
        }
    }

    /// Consume the simulation, returning the record and the final population.
    pub fn finish(self) -> (RunRecord, Vec<AgentRecord<P::State>>) {
        (self.record, self.population)
    }
}

/// A finished run: the record plus the final population.
pub type FinishedRun<S> = (RunRecord, Vec<AgentRecord<S>>);

/// Run `cfg.max_rounds` rounds of `proto` against `strategy`.
pub fn run_with_protocol<P: Protocol>(
    proto: &P,
    strategy: &dyn Strategy<P::State>,
    cfg: &RunConfig,
) -> Result<FinishedRun<P::State>, EngineError> {
    let mut sim = Simulation::new(proto, strategy, cfg);
    while sim.round_index() < cfg.max_rounds {
        let outcome = sim.run_round()?;
        if cfg.stop_on_violation && outcome.violation {
            break;
        }
    }
    Ok(sim.finish())
}

/// Run a full simulation as described by the config, dispatching on the
/// protocol kind. Deterministic function of `(cfg, seed)`.
pub fn run_simulation(cfg: &RunConfig) -> Result<RunRecord, EngineError> {
    match cfg.protocol {
        ProtocolKind::Main => {
            let proto = MainProtocol::with_mutation(cfg.params.clone(), cfg.mutation);
            let strategy = crate::adversary::build_main_strategy(
                cfg.strategy,
                &cfg.params,
                &cfg.strategy_params,
            );
            run_with_protocol(&proto, strategy.as_ref(), cfg).map(|(r, _)| r)
        }
        ProtocolKind::Attempt1 | ProtocolKind::Attempt2 => {
            let proto = BaselineProtocol::new(cfg.protocol, &cfg.params, &cfg.baseline);
            let strategy = baseline_strategy(cfg.strategy, cfg.protocol)?;
            run_with_protocol(&proto, strategy.as_ref(), cfg).map(|(r, _)| r)
        }
    }
}
