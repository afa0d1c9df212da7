//! Conflict-spec JSON: conflicting state pairs, environment effects, variable
//! declarations and search parameters.
//!
//! ```json
//! {
//!   "env_vars": [{"name": "temperature", "unit": "C", "min": 10, "max": 40, "granularity": 1}],
//!   "state_pairs": [{"type": "light", "states": ["on", "off"]}],
//!   "effects": [{"device_type": "heater", "state": "on", "variable": "temperature", "delta_per_tick": 1}],
//!   "clock_tick": 30,
//!   "depth_bound": 50,
//!   "default_pairs": true
//! }
//! ```

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use super::{json_error, ParseError};
use crate::model::{EnvVariable, CLOCK, MINUTES_PER_DAY};
use crate::quantity::Quantity;

pub const DEFAULT_CLOCK_TICK: u32 = 30;
pub const DEFAULT_DEPTH_BOUND: usize = 50;

/// An unordered pair of distinct states of one device type, stored with the
/// two states in ascending order.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StatePair {
    pub device_type: String,
    pub first: String,
    pub second: String,
}

impl StatePair {
    pub fn new(device_type: &str, a: &str, b: &str) -> Self {
        let (first, second) = if a <= b { (a, b) } else { (b, a) };
        StatePair { device_type: device_type.into(), first: first.into(), second: second.into() }
    }

    pub fn matches(&self, device_type: &str, a: &str, b: &str) -> bool {
        self.device_type == device_type
            && ((self.first == a && self.second == b) || (self.first == b && self.second == a))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectAnnotation {
    pub device_type: String,
    pub state: String,
    pub variable: String,
    pub delta_per_tick: Quantity,
}

impl EffectAnnotation {
    pub fn new(device_type: &str, state: &str, variable: &str, delta: impl Into<Quantity>) -> Self {
        EffectAnnotation {
            device_type: device_type.into(),
            state: state.into(),
            variable: variable.into(),
            delta_per_tick: delta.into(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConflictSpec {
    pub state_pairs: BTreeSet<StatePair>,
    pub effects: Vec<EffectAnnotation>,
    pub env_vars: Vec<EnvVariable>,
    pub clock_tick: u32,
    pub depth_bound: usize,
}

impl Default for ConflictSpec {
    fn default() -> Self {
        ConflictSpec {
            state_pairs: default_state_pairs(),
            effects: Vec::new(),
            env_vars: Vec::new(),
            clock_tick: DEFAULT_CLOCK_TICK,
            depth_bound: DEFAULT_DEPTH_BOUND,
        }
    }
}

impl ConflictSpec {
    /// A spec with no state pairs at all, not even the built-in ones.
    pub fn empty() -> Self {
        ConflictSpec { state_pairs: BTreeSet::new(), ..ConflictSpec::default() }
    }

    pub fn variable(&self, name: &str) -> Option<&EnvVariable> {
        self.env_vars.iter().find(|v| v.name == name)
    }

    /// Effects carried by a device of `device_type` in `state`.
    pub fn effects_of<'s>(&'s self, device_type: &'s str, state: &'s str) -> impl Iterator<Item = &'s EffectAnnotation> {
        self.effects.iter().filter(move |e| e.device_type == device_type && e.state == state)
    }

    pub fn is_state_pair(&self, device_type: &str, a: &str, b: &str) -> bool {
        a != b && self.state_pairs.contains(&StatePair::new(device_type, a, b))
    }

    /// Checks every spec invariant, reporting the first violation.
    pub fn validate(&self) -> Result<(), String> {
        if self.clock_tick == 0 || MINUTES_PER_DAY % self.clock_tick != 0 {
            return Err(format!("clock_tick {} must be a positive divisor of {MINUTES_PER_DAY}", self.clock_tick));
        }
        if self.depth_bound == 0 {
            return Err("depth_bound must be at least 1".into());
        }
        let mut names = HashSet::new();
        for v in &self.env_vars {
            if v.name.is_empty() {
                return Err("environment variable with empty name".into());
            }
            if v.name == CLOCK || v.name == "time" {
                return Err(format!("`{}` is reserved", v.name));
            }
            if !names.insert(v.name.as_str()) {
                return Err(format!("environment variable `{}` declared twice", v.name));
            }
            if v.min >= v.max {
                return Err(format!("`{}`: min must be below max", v.name));
            }
            if !v.granularity.is_positive() {
                return Err(format!("`{}`: granularity must be positive", v.name));
            }
            if !((v.max - v.min) / v.granularity).is_integer() {
                return Err(format!("`{}`: max - min must be a whole number of granularity steps", v.name));
            }
            if let Some(d) = v.default {
                if !v.contains(d) {
                    return Err(format!("`{}`: default {d} outside [{}, {}]", v.name, v.min, v.max));
                }
            }
        }
        for pair in &self.state_pairs {
            if pair.first == pair.second {
                return Err(format!("state pair for `{}` repeats state `{}`", pair.device_type, pair.first));
            }
        }
        let mut seen = HashSet::new();
        for e in &self.effects {
            let var = self
                .variable(&e.variable)
                .ok_or_else(|| format!("effect references undeclared environment variable `{}`", e.variable))?;
            if e.delta_per_tick.is_zero() {
                return Err(format!("effect ({}, {}, {}) has zero delta", e.device_type, e.state, e.variable));
            }
            if !(e.delta_per_tick / var.granularity).is_integer() {
                return Err(format!(
                    "effect ({}, {}, {}) delta {} is not a multiple of granularity {}",
                    e.device_type, e.state, e.variable, e.delta_per_tick, var.granularity
                ));
            }
            if !seen.insert((e.device_type.as_str(), e.state.as_str(), e.variable.as_str())) {
                return Err(format!("effect ({}, {}, {}) listed twice", e.device_type, e.state, e.variable));
            }
        }
        Ok(())
    }
}

/// Built-in conflicting pairs for common device types.
pub fn default_state_pairs() -> BTreeSet<StatePair> {
    let mut pairs = BTreeSet::from([StatePair::new("light", "on", "off"), StatePair::new("light", "low", "high")]);
    for t in ["ac", "heater", "fan", "plug", "switch"] {
        pairs.insert(StatePair::new(t, "on", "off"));
    }
    pairs.insert(StatePair::new("speaker", "playing", "paused"));
    pairs
}

#[derive(Deserialize, Serialize)]
struct PairDoc {
    #[serde(rename = "type")]
    device_type: String,
    states: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecDoc {
    #[serde(default)]
    env_vars: Vec<EnvVariable>,
    #[serde(default)]
    state_pairs: Vec<PairDoc>,
    #[serde(default)]
    effects: Vec<EffectAnnotation>,
    clock_tick: Option<u32>,
    depth_bound: Option<usize>,
    #[serde(default = "default_true")]
    default_pairs: bool,
}

fn default_true() -> bool {
    true
}

/// Parses a conflict-spec document; built-in pairs are merged unless
/// `default_pairs` is false. Whitespace-only input yields the defaults.
pub fn parse_conflict_spec(text: &str) -> Result<ConflictSpec, ParseError> {
    let doc: SpecDoc = if text.trim().is_empty() {
        serde_json::from_str("{}").map_err(json_error)?
    } else {
        serde_json::from_str(text).map_err(json_error)?
    };
    let mut state_pairs = if doc.default_pairs { default_state_pairs() } else { BTreeSet::new() };
    for p in doc.state_pairs {
        match p.states.as_slice() {
            [a, b] if a != b => {
                state_pairs.insert(StatePair::new(&p.device_type, a, b));
            }
            _ => {
                return Err(ParseError::Spec(format!(
                    "state pair for `{}` must list two distinct states",
                    p.device_type
                )))
            }
        }
    }
    let spec = ConflictSpec {
        state_pairs,
        effects: doc.effects,
        env_vars: doc.env_vars,
        clock_tick: doc.clock_tick.unwrap_or(DEFAULT_CLOCK_TICK),
        depth_bound: doc.depth_bound.unwrap_or(DEFAULT_DEPTH_BOUND),
    };
    spec.validate().map_err(ParseError::Spec)?;
    Ok(spec)
}

/// Writes the spec with every pair explicit and `default_pairs` off, so the
/// output parses back to an equal spec.
pub fn serialize_conflict_spec(spec: &ConflictSpec) -> String {
    let pairs: Vec<PairDoc> = spec
        .state_pairs
        .iter()
        .map(|p| PairDoc { device_type: p.device_type.clone(), states: vec![p.first.clone(), p.second.clone()] })
        .collect();
    let value = serde_json::json!({
        "env_vars": spec.env_vars,
        "state_pairs": pairs,
        "effects": spec.effects,
        "clock_tick": spec.clock_tick,
        "depth_bound": spec.depth_bound,
        "default_pairs": false,
    });
    super::pretty(&value)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn light_pairs() {
        let spec = parse_conflict_spec(
            r#"{"default_pairs":false,"state_pairs":[{"type":"light","states":["on","off"]},{"type":"light","states":["low","high"]}]}"#,
        )
        .unwrap();
        assert_eq!(spec.state_pairs.len(), 2);
        assert!(spec.is_state_pair("light", "off", "on"));
        assert!(spec.is_state_pair("light", "high", "low"));
        assert!(!spec.is_state_pair("light", "on", "low"));
    }

    #[test]
    fn empty_document_has_defaults() {
        for text in ["{}", "", "  \n"] {
            let spec = parse_conflict_spec(text).unwrap();
            assert_eq!(spec, ConflictSpec::default());
            assert_eq!(spec.clock_tick, 30);
            assert_eq!(spec.depth_bound, 50);
        }
    }

    #[test]
    fn opposite_effects() {
        let spec = parse_conflict_spec(
            r#"{"env_vars":[{"name":"temperature","unit":"C","min":10,"max":40,"granularity":1}],
                "effects":[{"device_type":"heater","state":"on","variable":"temperature","delta_per_tick":1},
                           {"device_type":"ac","state":"on","variable":"temperature","delta_per_tick":-1}]}"#,
        )
        .unwrap();
        assert_eq!(spec.effects.len(), 2);
        assert!(spec.effects[0].delta_per_tick.is_positive());
        assert!(spec.effects[1].delta_per_tick.is_negative());
    }

    #[test]
    fn undeclared_variable_is_an_error() {
        let err = parse_conflict_spec(
            r#"{"effects":[{"device_type":"heater","state":"on","variable":"humidity","delta_per_tick":1}]}"#,
        )
        .unwrap_err();
        assert!(matches!(err, ParseError::Spec(m) if m.contains("humidity")));
    }

    #[test]
    fn invalid_parameters() {
        assert!(parse_conflict_spec(r#"{"clock_tick":7}"#).is_err());
        assert!(parse_conflict_spec(r#"{"depth_bound":0}"#).is_err());
        assert!(parse_conflict_spec(r#"{"env_vars":[{"name":"t","min":0,"max":5,"granularity":2}]}"#).is_err());
        assert!(parse_conflict_spec(r#"{"env_vars":[{"name":"clock","min":0,"max":5,"granularity":1}]}"#).is_err());
        assert!(parse_conflict_spec(r#"{"state_pairs":[{"type":"x","states":["a","a"]}]}"#).is_err());
        assert!(matches!(parse_conflict_spec(r#"{"bogus":1}"#), Err(ParseError::Json { .. })));
    }

    #[test]
    fn serialization_round_trips() {
        let spec = parse_conflict_spec(
            r#"{"env_vars":[{"name":"lux","min":0,"max":10,"granularity":0.5,"default":2}],
                "effects":[{"device_type":"light","state":"on","variable":"lux","delta_per_tick":1.5}],
                "clock_tick":60}"#,
        )
        .unwrap();
        assert_eq!(parse_conflict_spec(&serialize_conflict_spec(&spec)).unwrap(), spec);
    }
}
