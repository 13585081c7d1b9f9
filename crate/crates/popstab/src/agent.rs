//! Per-agent protocol state and the observer-side metadata that rides along
//! with it.

/// Opaque identity of a live agent. Handles are unique within a run and are
/// never reused, even after the agent dies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct AgentHandle(pub u64);

impl std::fmt::Display for AgentHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// The protocol variables of a single agent.
///
/// `to_recruit` is bookkeeping — it never gates any protocol branch — and may
/// go negative for adversarially inserted states, so it is signed and never
/// clamped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentState {
    /// Position within the current epoch, in `[0, epoch_length - 1]`.
    pub round: u32,
    /// Whether the agent has been activated (colored) this epoch.
    pub am_active: bool,
    /// Cluster color; meaningful only while `am_active` is set.
    pub color: bool,
    /// Whether the agent is looking for a recruit in the current subphase.
    pub recruiting: bool,
    /// Remaining recruitment obligation; analysis-only.
    pub to_recruit: i32,
}

/// The state every agent starts in: all variables zero.
pub fn initial_agent_state() -> AgentState {
    AgentState {
        round: 0,
        am_active: false,
        color: false,
        recruiting: false,
        to_recruit: 0,
    }
}

/// Observer-side bookkeeping attached to each live agent by the engine.
///
/// Invisible to protocol logic: no protocol operation takes a `GhostMeta`,
/// and the adversary snapshot does not expose it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GhostMeta {
    /// Epoch-local cluster the agent belongs to while colored, identified by
    /// the founding leader's cluster id. `None` while inactive.
    pub cluster_id: Option<u64>,
    /// Whether this agent entered the system through an adversary insertion.
    pub inserted_by_adversary: bool,
    /// Global round index in which the agent appeared.
    pub birth_round: u64,
}

/// A live agent as the engine stores it: identity, protocol state and the
/// observer-side metadata. The metadata is crate-private so that neither
/// protocol logic nor adversary strategies can read it.
#[derive(Debug, Clone)]
pub struct AgentRecord<S> {
    pub handle: AgentHandle,
    pub state: S,
    pub(crate) meta: GhostMeta,
}

impl GhostMeta {
    pub fn protocol_birth(birth_round: u64) -> Self {
        GhostMeta {
            cluster_id: None,
            inserted_by_adversary: false,
            birth_round,
        }
    }

    pub fn adversary_birth(birth_round: u64) -> Self {
        GhostMeta {
            cluster_id: None,
            inserted_by_adversary: true,
            birth_round,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn initial_state_is_all_zero() {
        let s = initial_agent_state();
        assert_eq!(
            s,
            AgentState {
                round: 0,
                am_active: false,
                color: false,
                recruiting: false,
                to_recruit: 0
            }
        );
        // Determinism: two calls agree.
        assert_eq!(s, initial_agent_state());
    }
}
