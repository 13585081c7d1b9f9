//! Deterministic, seedable simulator of a synchronous population-stability
//! protocol: memory-bounded agents that replicate or self-destruct so as to
//! hold the population inside `[(1-alpha)N, (1+alpha)N]` while a budgeted
//! worst-case adversary deletes, inserts and rewrites agents — plus an
//! experiment harness that checks the protocol's stability properties
//! empirically.
//!
//! The protocol encodes population size in the variance of a color
//! distribution: each epoch a few agents self-select as leaders with
//! probability `1/(8 sqrt(N))`, recruit clusters of `sqrt(N)` agents sharing
//! a random color, and at the epoch end matched colored agents split on equal
//! colors (with probability `1 - 16/sqrt(N)`) or die on unequal colors. More
//! agents mean more clusters, a lower chance of meeting one's own cluster,
//! and therefore more deaths than splits; fewer agents tip the balance the
//! other way. The constants put the fixed point exactly at `N`.
//!
//! Crate layout mirrors the moving parts:
//!
//! * [`params`] — parameter validation and derived constants;
//! * [`agent`], [`message`] — agent state and the 3-bit message codec;
//! * [`protocol`] — the pure per-agent state machine;
//! * [`scheduler`] — the per-round random matching;
//! * [`adversary`] — the attack interface and built-in strategies;
//! * [`engine`] — the deterministic round loop;
//! * [`baselines`] — two intentionally failing predecessor protocols;
//! * [`analysis`] — epoch summaries, exact drift oracles, property checkers;
//! * [`config`] — the flat key-value config file;
//! * [`output`] — CSV/JSON artifact writers;
//! * [`verify`] — the frozen verification battery behind `popstab verify`.

pub mod adversary;
pub mod agent;
pub mod analysis;
pub mod baselines;
pub mod config;
pub mod engine;
pub mod message;
pub mod output;
pub mod params;
pub mod protocol;
pub mod rng;
pub mod scheduler;
pub mod verify;

pub use agent::{initial_agent_state, AgentHandle, AgentRecord, AgentState, GhostMeta};
pub use engine::{
    run_simulation, run_with_protocol, EngineError, Protocol, ProtocolKind, RoundOutcome,
    RunConfig, RunRecord, Simulation,
};
pub use message::{decode_message, encode_message, NeighborView, WireMessage};
pub use params::{validate_and_derive, ParamError, Rational, RawSimParams, SimParams};
pub use protocol::{main_step, AgentAction, MainProtocol, Mutation};
pub use rng::{seed_streams, CoinStream, StreamPurpose};
pub use scheduler::{sample_matching, MatchFraction, Matching};
