//! Initial-state overrides: `{"ac1": "on", "temperature": 30, "clock": "22:00"}`.
//!
//! Strings set device states, numbers set environment values. The clock also
//! accepts `HH:MM`.

use std::collections::BTreeMap;

use serde_json::Value;

use super::{json_error, object_of, ParseError};
use crate::model::{parse_clock, CLOCK};
use crate::quantity::Quantity;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StateOverrides {
    pub devices: BTreeMap<String, String>,
    pub env: BTreeMap<String, Quantity>,
}

impl StateOverrides {
    pub fn device(mut self, id: &str, state: &str) -> Self {
        self.devices.insert(id.into(), state.into());
        self
    }

    pub fn env(mut self, name: &str, value: impl Into<Quantity>) -> Self {
        self.env.insert(name.into(), value.into());
        self
    }

    pub fn is_empty(&self) -> bool {
        self.devices.is_empty() && self.env.is_empty()
    }
}

pub fn parse_overrides(text: &str) -> Result<StateOverrides, ParseError> {
    let root: Value = serde_json::from_str(text).map_err(json_error)?;
    let obj = object_of(&root, "state overrides")?;
    let mut out = StateOverrides::default();
    for (key, value) in obj {
        match value {
            Value::String(s) if key == CLOCK => {
                let minutes = parse_clock(s)
                    .ok_or_else(|| ParseError::Overrides(format!("invalid clock value `{s}`")))?;
                out.env.insert(key.clone(), Quantity::from(minutes as i64));
            }
            Value::String(s) => {
                out.devices.insert(key.clone(), s.clone());
            }
            Value::Number(_) => {
                let q: Quantity = serde_json::from_value(value.clone())
                    .map_err(|e| ParseError::Overrides(format!("`{key}`: {e}")))?;
                out.env.insert(key.clone(), q);
            }
            _ => {
                return Err(ParseError::Overrides(format!(
                    "`{key}` must be a state name or a number"
                )))
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mixed_overrides() {
        let o = parse_overrides(r#"{"ac1":"on","temperature":30,"clock":"22:00"}"#).unwrap();
        assert_eq!(o.devices["ac1"], "on");
        assert_eq!(o.env["temperature"], Quantity::from(30));
        assert_eq!(o.env[CLOCK], Quantity::from(1320));
        assert!(parse_overrides(r#"{"clock":"25:00"}"#).is_err());
        assert!(parse_overrides(r#"{"x":[1]}"#).is_err());
        assert!(parse_overrides("{}").unwrap().is_empty());
    }
}
