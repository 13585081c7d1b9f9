//! The pure per-agent state machine.
//!
//! Given the current state, the decoded neighbor message (or the absent
//! sentinel) and a coin stream, one step produces the successor state and an
//! action. Steps are pure: identical inputs and coin bits give identical
//! outputs, so agents may be stepped in any order or in parallel.
//!
//! Each epoch of `epoch_length` rounds has three phases: leader selection
//! (round 0), recruitment (rounds `1..epoch_length-1`, divided into subphases
//! of `t_inner` rounds) and evaluation (the final round). A round-consistency
//! check precedes all phase logic: a matched pair whose evaluation-round
//! indicators disagree self-destructs, which purges agents whose round
//! counter was corrupted by insertion.
//!
//! One deliberate deviation from a literal reading of the recruitment rules:
//! the subphase-boundary reset `recruiting := 1` applies only to active
//! agents. An unguarded reset would let inactive agents advertise recruitment
//! with the default color, which the rest of the protocol treats as
//! impossible (a recruiting agent is active as far as the message codec is
//! concerned).

use crate::agent::AgentState;
use crate::message::{decode_message, encode_message, NeighborView, WireMessage};
use crate::params::SimParams;
use crate::rng::CoinStream;

/// What an agent decided to do this round, beyond updating its own state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AgentAction {
    /// Keep running.
    None,
    /// Spawn a daughter agent carrying a bit-identical copy of the
    /// post-step state. Only possible in the evaluation round.
    Split,
    /// Remove this agent from the system. The state returned alongside a
    /// `Die` is the unchanged input state and is ignored by the engine.
    Die,
}

/// Test and instrumentation knob: deliberately broken protocol variants used
/// by the verification battery to prove its own checks can fail.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Mutation {
    #[default]
    None,
    /// Skip the round-consistency check entirely.
    NoConsistencyCheck,
    /// Split unconditionally on a same-color evaluation match, ignoring the
    /// split exponent.
    AlwaysSplit,
}

/// Flip a coin that is 1 with probability `2^-a`, consuming exactly `a`
/// unbiased bits. The loop never exits early, so coin consumption is
/// independent of the outcome.
pub fn toss_biased_coin(a: u32, coins: &mut CoinStream) -> bool {
    let mut c = true;
    for _ in 0..a {
        if !coins.next_bit() {
            c = false;
        }
    }
    c
}

/// Mutual-destruction check on the evaluation-round indicator: die if and
/// only if a neighbor is present and its indicator differs from ours.
pub fn check_round_consistency(
    state: &AgentState,
    nbr: &NeighborView,
    epoch_length: u32,
) -> AgentAction {
    let self_is_er = state.round == epoch_length - 1;
    match nbr.is_er {
        Some(nbr_is_er) if nbr_is_er != self_is_er => AgentAction::Die,
        _ => AgentAction::None,
    }
}

/// Leader selection, run in round 0 of each epoch.
///
/// The activation flag is assigned from the coin outcome, so a failed draw
/// deactivates the agent; the remaining fields are only touched on success.
/// Consumes `leader_exponent` bits, plus one color bit when the draw
/// succeeds.
pub fn determine_if_leader(
    state: &AgentState,
    params: &SimParams,
    coins: &mut CoinStream,
) -> AgentState {
    let mut next = *state;
    next.am_active = toss_biased_coin(params.leader_exponent, coins);
    if next.am_active {
        next.color = coins.next_bit();
        next.recruiting = true;
        next.to_recruit = params.half_log2_n() as i32;
    }
    next
}

/// One recruitment-phase step, for rounds `1..epoch_length-1`.
///
/// Either we recruited our neighbor (it reported inactive while we were
/// recruiting), or our neighbor recruited us (we were inactive and it
/// reported recruiting). At a subphase boundary every active agent re-arms
/// its recruiting flag for the next subphase.
pub fn recruitment_step(
    state: &AgentState,
    nbr: &NeighborView,
    params: &SimParams,
) -> AgentState {
    let mut next = *state;
    if nbr.active == Some(false) && state.recruiting {
        // Other agent has been activated.
        next.recruiting = false;
        next.to_recruit -= 1;
    } else if !state.am_active && nbr.recruiting == Some(true) {
        // This agent must be activated.
        next.am_active = true;
        next.color = nbr
            .color
            .expect("a recruiting message always carries a color");
        next.recruiting = false;
        let depth = (state.round + 1).div_ceil(params.t_inner);
        next.to_recruit = params.half_log2_n() as i32 - depth as i32;
    }
    if (state.round + 1).is_multiple_of(params.t_inner) && next.am_active {
        // Prepare for the next subphase.
        next.recruiting = true;
    }
    next
}

/// The evaluation step, run in the final round of each epoch: a matched pair
/// of active agents splits on equal colors (with probability
/// `1 - 2^-split_exponent`) and self-destructs on unequal colors. All
/// non-dying agents reset their activation, color and recruiting flags.
pub fn evaluation_step(
    state: &AgentState,
    nbr: &NeighborView,
    params: &SimParams,
    coins: &mut CoinStream,
) -> (AgentState, AgentAction) {
    evaluation_step_inner(state, nbr, params, coins, Mutation::None)
}

fn evaluation_step_inner(
    state: &AgentState,
    nbr: &NeighborView,
    params: &SimParams,
    coins: &mut CoinStream,
    mutation: Mutation,
) -> (AgentState, AgentAction) {
    let mut action = AgentAction::None;
    if state.am_active && nbr.active == Some(true) {
        if nbr.color == Some(state.color) {
            let stay = if mutation == Mutation::AlwaysSplit {
                false
            } else {
                toss_biased_coin(params.split_exponent, coins)
            };
            if !stay {
                action = AgentAction::Split;
            }
        } else {
            return (*state, AgentAction::Die);
        }
    }
    let mut next = *state;
    next.am_active = false;
    next.color = false;
    next.recruiting = false;
    (next, action)
}

/// One full protocol step over the raw three-bit wire message: decode,
/// consistency-check, dispatch by phase, advance the round counter.
pub fn main_step(
    state: &AgentState,
    nbr_wire: Option<WireMessage>,
    params: &SimParams,
    coins: &mut CoinStream,
) -> (AgentState, AgentAction) {
    let nbr = decode_message(nbr_wire);
    main_step_view(state, &nbr, params, coins)
}

/// As [`main_step`], but over an already-decoded neighbor view.
pub fn main_step_view(
    state: &AgentState,
    nbr: &NeighborView,
    params: &SimParams,
    coins: &mut CoinStream,
) -> (AgentState, AgentAction) {
    step_view_inner(state, nbr, params, coins, Mutation::None)
}

fn step_view_inner(
    state: &AgentState,
    nbr: &NeighborView,
    params: &SimParams,
    coins: &mut CoinStream,
    mutation: Mutation,
) -> (AgentState, AgentAction) {
    debug_assert!(state.round < params.epoch_length);
    if mutation != Mutation::NoConsistencyCheck
        && check_round_consistency(state, nbr, params.epoch_length) == AgentAction::Die
    {
        // Death pre-empts phase logic and the round increment.
        return (*state, AgentAction::Die);
    }
    if state.round == 0 {
        let mut next = determine_if_leader(state, params, coins);
        next.round = 1;
        (next, AgentAction::None)
    } else if state.round < params.epoch_length - 1 {
        let mut next = recruitment_step(state, nbr, params);
        next.round = state.round + 1;
        (next, AgentAction::None)
    } else {
        let (mut next, action) = evaluation_step_inner(state, nbr, params, coins, mutation);
        if action != AgentAction::Die {
            next.round = 0;
        }
        (next, action)
    }
}

/// The main protocol bound to a parameter set, in the shape the engine runs.
#[derive(Debug, Clone)]
pub struct MainProtocol {
    pub params: SimParams,
    pub mutation: Mutation,
}

impl MainProtocol {
    pub fn new(params: SimParams) -> Self {
        MainProtocol {
            params,
            mutation: Mutation::None,
        }
    }

    pub fn with_mutation(params: SimParams, mutation: Mutation) -> Self {
        MainProtocol { params, mutation }
    }

    pub(crate) fn step_wire(
        &self,
        state: &AgentState,
        nbr_wire: Option<WireMessage>,
        coins: &mut CoinStream,
    ) -> (AgentState, AgentAction) {
        let nbr = decode_message(nbr_wire);
        step_view_inner(state, &nbr, &self.params, coins, self.mutation)
    }

    pub(crate) fn encode_state(&self, state: &AgentState) -> WireMessage {
        encode_message(state, self.params.epoch_length)
    }
}

impl crate::engine::Protocol for MainProtocol {
    type State = AgentState;
    type Wire = WireMessage;

    fn initial_state(&self) -> AgentState {
        crate::agent::initial_agent_state()
    }

    fn encode(&self, state: &AgentState) -> WireMessage {
        self.encode_state(state)
    }

    fn step(
        &self,
        state: &AgentState,
        nbr: Option<WireMessage>,
        coins: &mut CoinStream,
    ) -> (AgentState, AgentAction) {
        self.step_wire(state, nbr, coins)
    }

    fn normalize_inserted(&self, state: &mut AgentState) {
        state.round %= self.params.epoch_length;
    }

    fn epoch_length(&self) -> Option<u32> {
        Some(self.params.epoch_length)
    }

    fn round_of(&self, state: &AgentState) -> u32 {
        state.round
    }

    fn is_active(&self, state: &AgentState) -> bool {
        state.am_active
    }

    fn color_of(&self, state: &AgentState) -> Option<bool> {
        state.am_active.then_some(state.color)
    }

    fn to_recruit_of(&self, state: &AgentState) -> i32 {
        state.to_recruit
    }

    fn death_is_consistency(&self, state: &AgentState, nbr: Option<WireMessage>) -> bool {
        let self_is_er = state.round == self.params.epoch_length - 1;
        nbr.is_some_and(|w| w.is_er != self_is_er)
    }

    fn cluster_transition(
        &self,
        pre: &AgentState,
        post: &AgentState,
    ) -> crate::engine::ClusterTransition {
        use crate::engine::ClusterTransition::*;
        if !post.am_active {
            Clear
        } else if pre.round == 0 {
            // A successful leader draw; round 0 overwrites the activation
            // flag, so a post-step active agent founded a cluster.
            Found
        } else if !pre.am_active {
            InheritFromPartner
        } else {
            Keep
        }
    }
}
