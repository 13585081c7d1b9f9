//! The two preliminary protocols, implemented behind the same per-agent step
//! interface as the main protocol so they run on the identical engine,
//! scheduler, adversary and metrics — a run differs only by a config key.
//!
//! They exist to fail measurably, not to be tuned into working:
//!
//! * Attempt 1 (non-interactive leader election): each agent flips a coin
//!   with success probability `1/N` at the start of a phase, then for the
//!   rest of the phase broadcasts the OR of its own coin and every bit it
//!   received. At the phase end, agents that saw no 1 split (the population
//!   looks small); the rest self-destruct with a small probability. An
//!   adversary that deletes the few coin-holders controls the signal
//!   completely.
//! * Attempt 2 (independent coloring): each agent flips a fair color at the
//!   start of a phase and compares the colors of the next two agents it
//!   meets: equal colors split (with probability `1 - c/N`), unequal colors
//!   self-destruct. The correction bias is `O(1/m)` per decision, far below
//!   the decision noise, so the population behaves like a random walk.
//!
//! The exact phase lengths and decision constants are sketches; they are
//! config-exposed with the defaults below and labeled illustrative.

use crate::adversary::{AdversaryOp, NullStrategy, Snapshot, Strategy, StrategyKind, UniformDeleter};
use crate::engine::{EngineError, Protocol, ProtocolKind};
use crate::params::SimParams;
use crate::protocol::{toss_biased_coin, AgentAction};
use crate::rng::CoinStream;

/// Tuning knobs for the baseline protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BaselineConfig {
    /// Attempt 1 phase length in rounds; defaults to `log2(N)^2`.
    pub attempt1_phase_len: Option<u32>,
    /// Attempt 1 self-destruct probability exponent: agents that saw a 1 die
    /// with probability `2^-exp` at the phase end.
    pub attempt1_die_exponent: u32,
    /// Attempt 2 stay probability numerator: equal colors split with
    /// probability `1 - c/N`.
    pub attempt2_no_split_count: u64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            attempt1_phase_len: None,
            attempt1_die_exponent: 1,
            attempt2_no_split_count: 2,
        }
    }
}

/// Per-agent state of either baseline. Fields are meaningful per variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaselineState {
    Attempt1 {
        /// This phase's biased coin (1 with probability 1/N).
        coin: bool,
        /// OR of the own coin and every received bit this phase.
        seen_one: bool,
        /// Position within the phase.
        phase_round: u32,
    },
    Attempt2 {
        /// This phase's fair color.
        color: bool,
        /// First observed color this phase, if any.
        first_obs: Option<bool>,
        /// Rounds since the phase started.
        phase_round: u32,
    },
}

/// Either baseline bound to its constants, in the shape the engine runs.
#[derive(Debug, Clone)]
pub struct BaselineProtocol {
    kind: ProtocolKind,
    log2_n: u32,
    phase_len: u32,
    die_exponent: u32,
    no_split_count: u64,
}

impl BaselineProtocol {
    pub fn new(kind: ProtocolKind, params: &SimParams, cfg: &BaselineConfig) -> Self {
        assert!(matches!(
            kind,
            ProtocolKind::Attempt1 | ProtocolKind::Attempt2
        ));
        let l = params.log2_n();
        BaselineProtocol {
            kind,
            log2_n: l,
            phase_len: cfg.attempt1_phase_len.unwrap_or(l * l).max(2),
            die_exponent: cfg.attempt1_die_exponent,
            no_split_count: cfg.attempt2_no_split_count,
        }
    }
}

/// One Attempt-1 step. Phase structure: round 0 flips the biased coin
/// (incoming bits are ignored on the flip round), rounds `1..phase_len-1`
/// propagate the OR, and the final round reads one last bit and decides:
/// split if no 1 was seen, otherwise die with probability `2^-die_exponent`.
pub fn attempt1_step(
    state: &BaselineState,
    nbr: Option<bool>,
    proto: &BaselineProtocol,
    coins: &mut CoinStream,
) -> (BaselineState, AgentAction) {
    let BaselineState::Attempt1 {
        coin,
        seen_one,
        phase_round,
    } = *state
    else {
        unreachable!("attempt1_step over an attempt2 state")
    };
    if phase_round == 0 {
        let coin = toss_biased_coin(proto.log2_n, coins);
        return (
            BaselineState::Attempt1 {
                coin,
                seen_one: coin,
                phase_round: 1,
            },
            AgentAction::None,
        );
    }
    let seen = seen_one || nbr == Some(true);
    if phase_round < proto.phase_len - 1 {
        return (
            BaselineState::Attempt1 {
                coin,
                seen_one: seen,
                phase_round: phase_round + 1,
            },
            AgentAction::None,
        );
    }
    // Decision round.
    let action = if !seen {
        AgentAction::Split
    } else if toss_biased_coin(proto.die_exponent, coins) {
        return (*state, AgentAction::Die);
    } else {
        AgentAction::None
    };
    (
        BaselineState::Attempt1 {
            coin,
            seen_one: seen,
            phase_round: 0,
        },
        action,
    )
}

/// One Attempt-2 step. Round 0 of a phase flips a fresh fair color (the
/// incoming message is ignored); afterwards the agent records the first
/// color it observes and acts on the second: equal colors split with
/// probability `1 - no_split_count/N`, unequal colors self-destruct.
pub fn attempt2_step(
    state: &BaselineState,
    nbr: Option<bool>,
    proto: &BaselineProtocol,
    coins: &mut CoinStream,
) -> (BaselineState, AgentAction) {
    let BaselineState::Attempt2 {
        color,
        first_obs,
        phase_round,
    } = *state
    else {
        unreachable!("attempt2_step over an attempt1 state")
    };
    if phase_round == 0 {
        return (
            BaselineState::Attempt2 {
                color: coins.next_bit(),
                first_obs: None,
                phase_round: 1,
            },
            AgentAction::None,
        );
    }
    let Some(observed) = nbr else {
        return (
            BaselineState::Attempt2 {
                color,
                first_obs,
                phase_round: phase_round + 1,
            },
            AgentAction::None,
        );
    };
    match first_obs {
        None => (
            BaselineState::Attempt2 {
                color,
                first_obs: Some(observed),
                phase_round: phase_round + 1,
            },
            AgentAction::None,
        ),
        Some(first) if first == observed => {
            let stay = coins.bits(proto.log2_n) < proto.no_split_count;
            let action = if stay {
                AgentAction::None
            } else {
                AgentAction::Split
            };
            (
                BaselineState::Attempt2 {
                    color,
                    first_obs: None,
                    phase_round: 0,
                },
                action,
            )
        }
        Some(_) => (*state, AgentAction::Die),
    }
}

impl Protocol for BaselineProtocol {
    type State = BaselineState;
    type Wire = bool;

    fn initial_state(&self) -> BaselineState {
        match self.kind {
            ProtocolKind::Attempt1 => BaselineState::Attempt1 {
                coin: false,
                seen_one: false,
                phase_round: 0,
            },
            _ => BaselineState::Attempt2 {
                color: false,
                first_obs: None,
                phase_round: 0,
            },
        }
    }

    fn encode(&self, state: &BaselineState) -> bool {
        match *state {
            BaselineState::Attempt1 { seen_one, .. } => seen_one,
            BaselineState::Attempt2 { color, .. } => color,
        }
    }

    fn step(
        &self,
        state: &BaselineState,
        nbr: Option<bool>,
        coins: &mut CoinStream,
    ) -> (BaselineState, AgentAction) {
        match self.kind {
            ProtocolKind::Attempt1 => attempt1_step(state, nbr, self, coins),
            _ => attempt2_step(state, nbr, self, coins),
        }
    }

    fn normalize_inserted(&self, state: &mut BaselineState) {
        if let BaselineState::Attempt1 { phase_round, .. } = state {
            *phase_round %= self.phase_len;
        }
    }

    fn round_of(&self, state: &BaselineState) -> u32 {
        match *state {
            BaselineState::Attempt1 { phase_round, .. }
            | BaselineState::Attempt2 { phase_round, .. } => phase_round,
        }
    }
}

/// Deletes every agent currently broadcasting a 1 (coin holders and agents
/// they informed), up to the budget. This is the assassination attack the
/// first baseline cannot survive: with the signal suppressed, every agent
/// judges the population empty of leaders and splits at each phase end.
pub struct SignalDeleter;

impl Strategy<BaselineState> for SignalDeleter {
    fn name(&self) -> &'static str {
        "leader_assassin"
    }

    fn act(
        &self,
        snapshot: &Snapshot<'_, BaselineState>,
        budget: u64,
        _rng: &mut CoinStream,
    ) -> Vec<AdversaryOp<BaselineState>> {
        snapshot
            .iter()
            .filter(|(_, s)| {
                matches!(
                    s,
                    BaselineState::Attempt1 {
                        seen_one: true,
                        ..
                    }
                )
            })
            .take(budget as usize)
            .map(|(h, _)| AdversaryOp::Delete(h))
            .collect()
    }
}

/// Build a strategy usable against a baseline protocol. Strategies that read
/// main-protocol state have no meaning here and are rejected, except for the
/// assassin, which maps to its Attempt-1 analogue.
pub fn baseline_strategy(
    kind: StrategyKind,
    protocol: ProtocolKind,
) -> Result<Box<dyn Strategy<BaselineState>>, EngineError> {
    match (kind, protocol) {
        (StrategyKind::Null, _) => Ok(Box::new(NullStrategy)),
        (StrategyKind::UniformDeleter, _) => Ok(Box::new(UniformDeleter)),
        (StrategyKind::LeaderAssassin, ProtocolKind::Attempt1) => Ok(Box::new(SignalDeleter)),
        _ => Err(EngineError::UnsupportedStrategy {
            strategy: kind.name(),
            protocol: protocol.name(),
        }),
    }
}
