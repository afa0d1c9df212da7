//! Formal modeling and conflict detection for smart-home trigger-action rules.

pub mod detect;
pub mod engine;
pub mod fixtures;
pub mod io;
pub mod llm;
pub mod maude;
pub mod model;
pub mod pipeline;
pub mod quantity;

pub use io::{ConflictSpec, EffectAnnotation, ParseError, StateOverrides, StatePair};
pub use model::{
    AutomationRule, Comparator, DeviceSpec, EnvVariable, HomeState, RuleAction, TriggerAtom,
};
pub use quantity::Quantity;
