//! Exact outcomes of the program-game Prisoner's Dilemma for proof-based
//! FairBots (DUPOC, CIMCIC, PrudentBot), CliqueBot, and the epsilon-grounded
//! FairBot.
//!
//! Proof-based agents are decided by evaluating their self-referential
//! cooperation sentences on the finite chain of worlds of provability logic
//! ([`provability`]); grounded agents are handled exactly with rational
//! arithmetic ([`matchup`]). [`equilibrium`] scores matches and checks
//! equilibrium claims, and [`montecarlo`] replays matches under a seeded
//! random-bitstring model to cross-check the exact numbers.

pub mod agents;
pub mod equilibrium;
pub mod formula;
pub mod matchup;
pub mod montecarlo;
pub mod provability;

pub use agents::{builtin, default_roster, Builtin, Roster, RosterParams};
pub use formula::{Action, AgentRef, AgentSpec, BoxLevel, Formula, Rational};
pub use matchup::{Arena, MatchError, OutcomeDistribution};
