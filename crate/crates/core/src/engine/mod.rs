//! Finite transition systems with interleaving semantics and bounded search.

mod search;
mod system;

pub use search::{SearchMode, SearchOutcome};
pub(crate) use search::PackedGoal;
pub use system::{build_system, BuildError, EngineError, Step, Trace, Transition, TransitionKind, TransitionSystem};
pub(crate) use system::all_hold;
