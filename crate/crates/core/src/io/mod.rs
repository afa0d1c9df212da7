//! JSON documents (device lists, rule lists, conflict specs, state overrides)
//! and the trigger/action expression grammar.

pub mod conflict_spec;
pub mod devices;
pub mod overrides;
pub mod rules;
pub mod trigger;

use serde_json::{Map, Value};

pub use conflict_spec::{
    default_state_pairs, parse_conflict_spec, serialize_conflict_spec, ConflictSpec, EffectAnnotation,
    StatePair,
};
pub use devices::{
    parse_device_list, parse_incomplete_device_list, serialize_device_list, serialize_incomplete_device_list,
    synthesize_capability, PartialDevice,
};
pub use overrides::{parse_overrides, StateOverrides};
pub use rules::{parse_rule_list, serialize_rule_list};
pub use trigger::{format_action, format_atom, format_trigger, parse_action_list, parse_trigger, SyntaxError};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ParseError {
    #[error("line {line}, column {column}: {message}")]
    Json { line: usize, column: usize, message: String },
    #[error("{what} must be a JSON object")]
    NotObject { what: String },
    #[error("device `{device}`: {message}")]
    DeviceSchema { device: String, message: String },
    #[error("rule `{rule}`: {message}")]
    RuleSchema { rule: String, message: String },
    #[error("rule `{rule}`, {field} column {column}: {message}")]
    Expression { rule: String, field: &'static str, column: usize, message: String },
    #[error("conflict spec: {0}")]
    Spec(String),
    #[error("state overrides: {0}")]
    Overrides(String),
}

pub(crate) fn json_error(e: serde_json::Error) -> ParseError {
    ParseError::Json { line: e.line(), column: e.column(), message: e.to_string() }
}

pub(crate) fn object_of<'v>(value: &'v Value, what: &str) -> Result<&'v Map<String, Value>, ParseError> {
    value.as_object().ok_or_else(|| ParseError::NotObject { what: what.to_string() })
}

/// Two-space indented JSON with a trailing newline.
pub(crate) fn pretty(value: &Value) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    text.push('\n');
    text
}
