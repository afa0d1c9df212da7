//! The rule-list JSON document:
//! `{"rule1": {"trigger": "temperature > 27 && ac1 == off", "action": "ac1.turn_on"}}`.
//!
//! `action` is either one `device.action` string or an array of them.

use serde_json::{Map, Value};

use super::trigger::{format_action, format_trigger, parse_action_list, parse_trigger};
use super::{json_error, object_of, ParseError};
use crate::model::AutomationRule;

fn schema(rule: &str, message: impl Into<String>) -> ParseError {
    ParseError::RuleSchema { rule: rule.to_string(), message: message.into() }
}

fn expression(rule: &str, field: &'static str, e: super::SyntaxError) -> ParseError {
    ParseError::Expression { rule: rule.to_string(), field, column: e.column, message: e.message }
}

fn parse_rule(id: &str, value: &Value) -> Result<AutomationRule, ParseError> {
    let obj = value.as_object().ok_or_else(|| schema(id, "rule entry must be an object"))?;
    let trigger_text = match obj.get("trigger") {
        Some(Value::String(s)) => s,
        Some(_) => return Err(schema(id, "field `trigger` must be a string")),
        None => return Err(schema(id, "missing field `trigger`")),
    };
    let trigger = parse_trigger(trigger_text).map_err(|e| expression(id, "trigger", e))?;
    let actions = match obj.get("action") {
        Some(Value::String(s)) => parse_action_list(s).map_err(|e| expression(id, "action", e))?,
        Some(Value::Array(items)) => {
            let mut out = Vec::new();
            for item in items {
                let text = item
                    .as_str()
                    .ok_or_else(|| schema(id, "field `action` must be a string or an array of strings"))?;
                out.extend(parse_action_list(text).map_err(|e| expression(id, "action", e))?);
            }
            if out.is_empty() {
                return Err(schema(id, "empty action"));
            }
            out
        }
        Some(_) => return Err(schema(id, "field `action` must be a string or an array of strings")),
        None => return Err(schema(id, "missing field `action`")),
    };
    let extra = obj
        .iter()
        .filter(|(k, _)| k.as_str() != "trigger" && k.as_str() != "action")
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    Ok(AutomationRule { id: id.to_string(), trigger, actions, extra })
}

/// Parses a rule-list document, keeping document order.
pub fn parse_rule_list(text: &str) -> Result<Vec<AutomationRule>, ParseError> {
    let root: Value = serde_json::from_str(text).map_err(json_error)?;
    rules_from_value(&root)
}

pub(crate) fn rules_from_value(root: &Value) -> Result<Vec<AutomationRule>, ParseError> {
    let obj = object_of(root, "rule list")?;
    obj.iter().map(|(id, v)| parse_rule(id, v)).collect()
}

pub(crate) fn rules_to_value(rules: &[AutomationRule]) -> Value {
    let mut sorted: Vec<&AutomationRule> = rules.iter().collect();
    sorted.sort_by(|a, b| a.id.cmp(&b.id));
    let obj: Map<String, Value> = sorted
        .into_iter()
        .map(|r| {
            let mut entry = Map::new();
            entry.insert("trigger".into(), Value::String(format_trigger(&r.trigger)));
            let action = match r.actions.as_slice() {
                [single] => Value::String(format_action(single)),
                many => Value::Array(many.iter().map(|a| Value::String(format_action(a))).collect()),
            };
            entry.insert("action".into(), action);
            for (k, v) in &r.extra {
                entry.insert(k.clone(), v.clone());
            }
            (r.id.clone(), Value::Object(entry))
        })
        .collect();
    Value::Object(obj)
}

/// Canonical form: keys sorted by rule id, atoms and actions in declaration order.
pub fn serialize_rule_list(rules: &[AutomationRule]) -> String {
    super::pretty(&rules_to_value(rules))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Comparator, RuleAction, TriggerAtom};

    #[test]
    fn desk_lamp_rule() {
        let rules =
            parse_rule_list(r#"{"rule1":{"trigger":"time == 22:00 && desk_lamp == on","action":"desk_lamp.turn_off"}}"#)
                .unwrap();
        assert_eq!(rules.len(), 1);
        assert_eq!(rules[0].trigger, vec![TriggerAtom::Time { minutes: 1320 }, TriggerAtom::state("desk_lamp", "on")]);
        assert_eq!(rules[0].actions, vec![RuleAction::new("desk_lamp", "turn_off")]);
    }

    #[test]
    fn ac_rule() {
        let rules =
            parse_rule_list(r#"{"rule1":{"trigger":"temperature > 27 && ac1 == off","action":"ac1.turn_on"}}"#).unwrap();
        assert_eq!(
            rules[0].trigger,
            vec![TriggerAtom::env("temperature", Comparator::Gt, 27), TriggerAtom::state("ac1", "off")]
        );
    }

    #[test]
    fn empty_trigger_is_rejected() {
        let err = parse_rule_list(r#"{"r":{"trigger":"","action":"a.b"}}"#).unwrap_err();
        match err {
            ParseError::Expression { rule, message, .. } => {
                assert_eq!(rule, "r");
                assert_eq!(message, "empty trigger");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn trigger_errors_cite_rule_and_column() {
        let err = parse_rule_list(r#"{"r7":{"trigger":"lamp == on && fan ~ on","action":"a.b"}}"#).unwrap_err();
        assert_eq!(
            err,
            ParseError::Expression {
                rule: "r7".into(),
                field: "trigger",
                column: 19,
                message: "unexpected character `~`".into()
            }
        );
    }

    #[test]
    fn serialization_sorts_keys_and_round_trips() {
        assert_eq!(serialize_rule_list(&[]).trim(), "{}");
        let text = r#"{"zeta":{"trigger":"lamp == on","action":["lamp.turn_off","fan.turn_on"],"note":"x"},
                       "alpha":{"trigger":"time == 07:00","action":"lamp.turn_on"}}"#;
        let rules = parse_rule_list(text).unwrap();
        assert_eq!(rules[0].id, "zeta");
        let canonical = serialize_rule_list(&rules);
        assert!(canonical.find("alpha").unwrap() < canonical.find("zeta").unwrap());
        let again = parse_rule_list(&canonical).unwrap();
        assert_eq!(again.len(), 2);
        assert_eq!(again[1], rules[0]);
        assert_eq!(again[0], rules[1]);
        assert_eq!(serialize_rule_list(&again), canonical);
    }
}
