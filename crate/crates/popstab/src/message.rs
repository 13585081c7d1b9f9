//! The three-bit wire message and its decoded logical view.
//!
//! A full status message would carry four booleans: the evaluation-round
//! indicator, the activation flag, the color and the recruiting flag. Three
//! bits suffice because the receiving logic never needs all four at once:
//!
//! * evaluation round (`is_er = 1`): the payload carries `am_active` and
//!   `color`; `recruiting` is irrelevant in the evaluation branch;
//! * recruitment rounds (`is_er = 0`): the payload carries `recruiting`,
//!   then `color` when recruiting (a recruiter is active by protocol
//!   invariant, so its activation flag is implied) or `am_active` when not
//!   recruiting (the color of a non-recruiting agent is never read).

use crate::agent::AgentState;

/// Exactly three bits on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct WireMessage {
    pub is_er: bool,
    pub payload_a: bool,
    pub payload_b: bool,
}

impl WireMessage {
    /// Pack into the low three bits of a byte: bit0 = is_er, bit1 = payload_a,
    /// bit2 = payload_b.
    pub fn to_bits(self) -> u8 {
        u8::from(self.is_er) | u8::from(self.payload_a) << 1 | u8::from(self.payload_b) << 2
    }

    /// Unpack from the low three bits; higher bits are ignored.
    pub fn from_bits(bits: u8) -> Self {
        WireMessage {
            is_er: bits & 1 != 0,
            payload_a: bits & 2 != 0,
            payload_b: bits & 4 != 0,
        }
    }
}

/// Decoded logical view of a neighbor message. `None` means the value is
/// unknown: either the field is not representable for this message shape or
/// the agent was unmatched this round. Guards compare against `Some(_)`, so
/// any comparison with an unknown value is false.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NeighborView {
    pub is_er: Option<bool>,
    pub active: Option<bool>,
    pub color: Option<bool>,
    pub recruiting: Option<bool>,
}

impl NeighborView {
    /// The all-unknown view of an unmatched round.
    pub const ABSENT: NeighborView = NeighborView {
        is_er: None,
        active: None,
        color: None,
        recruiting: None,
    };

    pub fn is_absent(&self) -> bool {
        self.is_er.is_none()
    }
}

/// Encode an agent's status into the three-bit wire form.
pub fn encode_message(state: &AgentState, epoch_length: u32) -> WireMessage {
    let is_er = state.round == epoch_length - 1;
    let (payload_a, payload_b) = if is_er {
        (state.am_active, state.color)
    } else if state.recruiting {
        (true, state.color)
    } else {
        (false, state.am_active)
    };
    WireMessage {
        is_er,
        payload_a,
        payload_b,
    }
}

/// Decode a received wire message, or the absent sentinel for an unmatched
/// round, into the logical view.
///
/// A recruiting message implies an active sender, so `active` decodes to
/// `Some(true)` in that shape even though the bit is not on the wire.
pub fn decode_message(wire: Option<WireMessage>) -> NeighborView {
    let Some(w) = wire else {
        return NeighborView::ABSENT;
    };
    if w.is_er {
        NeighborView {
            is_er: Some(true),
            active: Some(w.payload_a),
            color: Some(w.payload_b),
            recruiting: None,
        }
    } else if w.payload_a {
        NeighborView {
            is_er: Some(false),
            active: Some(true),
            color: Some(w.payload_b),
            recruiting: Some(true),
        }
    } else {
        NeighborView {
            is_er: Some(false),
            active: Some(w.payload_b),
            color: None,
            recruiting: Some(false),
        }
    }
}

/// The logical view an agent in `state` would present if the full four-tuple
/// were on the wire. Used by tests to compare codec-mediated steps against
/// full-information steps.
pub fn full_view(state: &AgentState, epoch_length: u32) -> NeighborView {
    NeighborView {
        is_er: Some(state.round == epoch_length - 1),
        active: Some(state.am_active),
        color: Some(state.color),
        recruiting: Some(state.recruiting),
    }
}
