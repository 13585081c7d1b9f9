//! Line-by-line transcription of the per-agent procedure listings, used as
//! the reference side of the oracle-equivalence acceptance check.
//!
//! Deliberately naive: a mutable agent record, one function per subroutine,
//! statements in listing order. Unknown message components are represented
//! as `None` and every comparison against an unknown is false, matching the
//! unmatched-round convention. Independent of the library's protocol module;
//! only the coin stream type is shared so both sides can consume identical
//! bit sequences.

use popstab::params::SimParams;
use popstab::rng::CoinStream;

/// The four logical components of a received message; `None` is the unknown
/// value, either because the agent was unmatched or because the three-bit
/// message shape does not carry the component.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleView {
    pub is_er: Option<bool>,
    pub am_active: Option<bool>,
    pub mycolor: Option<bool>,
    pub recruiting: Option<bool>,
}

impl OracleView {
    pub const ABSENT: OracleView = OracleView {
        is_er: None,
        am_active: None,
        mycolor: None,
        recruiting: None,
    };
}

/// Decode a three-bit wire tuple `(is_er, payload_a, payload_b)` by the
/// published encoding rules, leaving unknown components unknown. Note the
/// recruiting shape leaves `am_active` unknown here; the library infers it,
/// and the equivalence sweep confirms the two readings never diverge on a
/// reachable branch.
pub fn oracle_decode(wire: Option<(bool, bool, bool)>) -> OracleView {
    match wire {
        None => OracleView::ABSENT,
        Some((true, a, b)) => OracleView {
            is_er: Some(true),
            am_active: Some(a),
            mycolor: Some(b),
            recruiting: None,
        },
        Some((false, true, b)) => OracleView {
            is_er: Some(false),
            am_active: None,
            mycolor: Some(b),
            recruiting: Some(true),
        },
        Some((false, false, b)) => OracleView {
            is_er: Some(false),
            am_active: Some(b),
            mycolor: None,
            recruiting: Some(false),
        },
    }
}

/// One agent as the listings model it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OracleAgent {
    pub round: u32,
    pub am_active: bool,
    pub mycolor: bool,
    pub recruiting: bool,
    pub to_recruit: i32,
    pub self_is_er: bool,
    pub alive: bool,
    pub split: bool,
}

impl OracleAgent {
    pub fn new(round: u32, am_active: bool, mycolor: bool, recruiting: bool, to_recruit: i32) -> Self {
        OracleAgent {
            round,
            am_active,
            mycolor,
            recruiting,
            to_recruit,
            self_is_er: false,
            alive: true,
            split: false,
        }
    }
}

fn toss_biased_coin(a: u32, coins: &mut CoinStream) -> bool {
    let mut c = true;
    for _i in 0..a {
        let b = coins.next_bit();
        if !b {
            c = false;
        }
    }
    c
}

fn determine_if_leader(agent: &mut OracleAgent, params: &SimParams, coins: &mut CoinStream) {
    agent.am_active = toss_biased_coin(params.leader_exponent, coins);
    if agent.am_active {
        agent.mycolor = coins.next_bit();
        agent.recruiting = true;
        agent.to_recruit = params.half_log2_n() as i32;
    }
}

fn recruitment_phase(agent: &mut OracleAgent, nbr: &OracleView, params: &SimParams) {
    if nbr.am_active == Some(false) && agent.recruiting {
        // Other agent has been activated.
        agent.recruiting = false;
        agent.to_recruit -= 1;
    } else if !agent.am_active && nbr.recruiting == Some(true) {
        // This agent must be activated.
        agent.am_active = true;
        agent.mycolor = nbr.mycolor.expect("recruiting message carries the color");
        agent.recruiting = false;
        agent.to_recruit =
            params.half_log2_n() as i32 - ((agent.round + 1).div_ceil(params.t_inner)) as i32;
    }
    if (agent.round + 1).is_multiple_of(params.t_inner) {
        // Prepare for the next subphase; recruitment is an activity of
        // active agents only.
        if agent.am_active {
            agent.recruiting = true;
        }
    }
}

fn evaluation_phase(agent: &mut OracleAgent, nbr: &OracleView, params: &SimParams, coins: &mut CoinStream) {
    if agent.am_active && nbr.am_active == Some(true) {
        if nbr.mycolor == Some(agent.mycolor) {
            // Colors same: split with high probability.
            let c = toss_biased_coin(params.split_exponent, coins);
            if !c {
                agent.split = true;
            }
        } else {
            // Colors different: self-destruct with probability 1.
            agent.alive = false;
            return;
        }
    }
    agent.am_active = false;
    agent.mycolor = false;
    agent.recruiting = false;
}

fn check_round_consistency(agent: &mut OracleAgent, nbr: &OracleView) {
    if nbr.is_er.is_some() && nbr.is_er != Some(agent.self_is_er) {
        agent.alive = false;
    }
}

/// The main per-round procedure: exchange (modeled by the caller handing in
/// the decoded view), consistency check, then the phase subroutine selected
/// by the round counter.
pub fn main_protocol_step(
    agent: &mut OracleAgent,
    nbr: &OracleView,
    params: &SimParams,
    coins: &mut CoinStream,
) {
    agent.self_is_er = agent.round == params.epoch_length - 1;
    check_round_consistency(agent, nbr);
    if !agent.alive {
        return;
    }
    if agent.round == 0 {
        // Handle initialization of leaders.
        determine_if_leader(agent, params, coins);
        agent.round += 1;
    } else if agent.round < params.epoch_length - 1 {
        // Perform recruitment phase.
        recruitment_phase(agent, nbr, params);
        agent.round += 1;
    } else {
        // Final round of phase. Perform split or death.
        evaluation_phase(agent, nbr, params, coins);
        if !agent.alive {
            return;
        }
        agent.round = 0;
    }
}
