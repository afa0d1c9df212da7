//! The offline backend. Its answer is a pure function of the prompt, built
//! from a small rulebook keyed by device type, so whole pipeline runs are
//! reproducible without a model.

use std::collections::BTreeMap;

use serde_json::{json, Map, Value};

use super::backend::{Backend, BackendError};
use super::prompt::{Prompt, PromptKind};
use crate::detect::{ConflictKind, ConflictReport};
use crate::io::{parse_device_list, parse_incomplete_device_list, parse_rule_list, serialize_rule_list};
use crate::maude::{render_logic_script, AdapterProgram, Call, InitialValue, ModelDevice, ModelTransition};
use crate::model::{rule_result_list, AutomationRule, DeviceSpec, TriggerAtom};

#[derive(Clone, Copy, Debug, Default)]
pub struct MockBackend;

struct Entry {
    device_type: &'static str,
    keywords: &'static [&'static str],
    actions: &'static [&'static str],
    states: &'static [&'static str],
    capability: &'static [(&'static str, &'static str)],
    /// Sensor variable and `(state, lower bound)` readings.
    sensor: Option<(&'static str, &'static [(&'static str, i64)])>,
    /// Trigger of the generated rule (`{id}` is the device) and its action.
    rule: Option<(&'static str, &'static str)>,
}

const fn actuator(
    device_type: &'static str,
    keywords: &'static [&'static str],
    actions: &'static [&'static str],
    states: &'static [&'static str],
    rule: (&'static str, &'static str),
) -> Entry {
    Entry { device_type, keywords, actions, states, capability: &[], sensor: None, rule: Some(rule) }
}

const ON_OFF: &[&str] = &["turn_on", "turn_off"];
const OFF_ON: &[&str] = &["off", "on"];

const RULEBOOK: &[Entry] = &[
    actuator(
        "light",
        &["light", "lamp", "bulb"],
        &["turn_on", "turn_off", "dim", "brighten"],
        &["off", "on", "low", "high"],
        ("{id} == off && time == 19:00", "turn_on"),
    ),
    actuator("ac", &["air conditioner", "ac"], ON_OFF, OFF_ON, ("{id} == off && temperature > 27", "turn_on")),
    actuator("heater", &["heater"], ON_OFF, OFF_ON, ("{id} == off && temperature < 18", "turn_on")),
    actuator("fan", &["fan"], ON_OFF, OFF_ON, ("{id} == off && temperature > 30", "turn_on")),
    actuator("plug", &["plug", "socket"], ON_OFF, OFF_ON, ("time == 23:00", "turn_off")),
    actuator("switch", &["switch"], ON_OFF, OFF_ON, ("time == 23:00", "turn_off")),
    actuator(
        "camera",
        &["camera"],
        &["turn_on", "turn_off", "start_record"],
        &["off", "on", "recording"],
        ("time == 22:00", "start_record"),
    ),
    Entry {
        device_type: "speaker",
        keywords: &["speaker"],
        actions: &["play", "pause"],
        states: &["paused", "playing"],
        capability: &[("play", "playing"), ("pause", "paused")],
        sensor: None,
        rule: Some(("time == 07:00", "play")),
    },
    Entry {
        device_type: "motion_sensor",
        keywords: &["motion"],
        actions: &[],
        states: &["clear", "detected"],
        capability: &[],
        sensor: Some(("motion", &[("clear", 0), ("detected", 1)])),
        rule: None,
    },
    Entry {
        device_type: "contact_sensor",
        keywords: &["door", "window", "contact"],
        actions: &[],
        states: &["closed", "open"],
        capability: &[],
        sensor: Some(("door", &[("closed", 0), ("open", 1)])),
        rule: None,
    },
];

fn entry(device_type: &str) -> Option<&'static Entry> {
    RULEBOOK.iter().find(|e| e.device_type == device_type)
}

/// Lowercase words separated by single spaces, padded at both ends.
fn words(text: &str) -> String {
    let mapped: String = text.chars().map(|c| if c.is_alphanumeric() { c.to_ascii_lowercase() } else { ' ' }).collect();
    format!(" {} ", mapped.split_whitespace().collect::<Vec<_>>().join(" "))
}

fn mentions(manuals: &[String], keywords: &[&str]) -> bool {
    manuals.iter().any(|m| keywords.iter().any(|k| m.contains(&format!(" {k} "))))
}

/// `<type> states: a, b` and `<type> actions: x, y` lines in a manual.
fn listed(manuals: &[&str], device_type: &str, field: &str) -> Option<Vec<String>> {
    let prefix = format!("{device_type} {field}:");
    manuals.iter().flat_map(|m| m.lines()).find_map(|line| {
        let rest = line.trim().strip_prefix(&prefix)?;
        Some(rest.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect())
    })
}

fn extract_devices(prompt: &Prompt) -> String {
    let Some(list) = prompt.attachment("incomplete_device_list") else {
        return "I need the incomplete device list.".into();
    };
    let Ok(devices) = parse_incomplete_device_list(&list.content) else {
        return "The incomplete device list is not valid JSON.".into();
    };
    let manuals: Vec<&str> = prompt.attachments("user_manual").map(|a| a.content.as_str()).collect();
    let manual_words: Vec<String> = manuals.iter().map(|m| words(m)).collect();
    let mut out = Map::new();
    for d in devices {
        let mut obj = Map::new();
        obj.insert("type".into(), json!(d.device_type));
        let known = entry(&d.device_type).filter(|e| mentions(&manual_words, e.keywords));
        let states = listed(&manuals, &d.device_type, "states")
            .or_else(|| known.map(|e| e.states.iter().map(|s| s.to_string()).collect()));
        let actions = listed(&manuals, &d.device_type, "actions")
            .or_else(|| known.map(|e| e.actions.iter().map(|s| s.to_string()).collect()));
        obj.insert("action".into(), json!(actions.unwrap_or_default()));
        // Without a manual describing the device the mock has nothing to say
        // about its states, and the answer fails validation.
        if let Some(states) = states {
            obj.insert("state".into(), json!(states));
        }
        obj.insert("location".into(), json!(d.location.unwrap_or_default()));
        if let Some(e) = known {
            if !e.capability.is_empty() {
                let cap: Map<String, Value> = e.capability.iter().map(|(a, s)| (a.to_string(), json!(s))).collect();
                obj.insert("capability".into(), Value::Object(cap));
            }
            if let Some((variable, readings)) = e.sensor {
                obj.insert("sensor_of".into(), json!(variable));
                let r: Map<String, Value> = readings.iter().map(|(s, v)| (s.to_string(), json!(v))).collect();
                obj.insert("readings".into(), Value::Object(r));
            }
        }
        out.insert(d.id, Value::Object(obj));
    }
    format!("```json\n{}\n```", serde_json::to_string_pretty(&Value::Object(out)).expect("JSON values serialize"))
}

fn device_list(prompt: &Prompt) -> Option<Vec<DeviceSpec>> {
    parse_device_list(&prompt.attachment("device_list")?.content).ok()
}

fn generate_rules(prompt: &Prompt) -> String {
    let Some(devices) = device_list(prompt) else {
        return "The device list is missing or invalid.".into();
    };
    let mut out = Map::new();
    for d in &devices {
        let Some((trigger, action)) = entry(&d.device_type).and_then(|e| e.rule) else {
            continue;
        };
        if !d.actions.iter().any(|a| a == action) {
            continue;
        }
        let id = format!("rule{}", out.len() + 1);
        out.insert(id, json!({"trigger": trigger.replace("{id}", &d.id), "action": format!("{}.{}", d.id, action)}));
    }
    format!("Here are the rules.\n\n{}", serde_json::to_string_pretty(&Value::Object(out)).expect("JSON values serialize"))
}

/// The logic script for the attached devices and rules.
pub fn logic_code_for(devices: &[DeviceSpec], rules: &[AutomationRule]) -> Option<AdapterProgram> {
    let mut calls: Vec<Call> = devices
        .iter()
        .map(|d| {
            Call::ModelDevice(ModelDevice {
                id: d.id.clone(),
                states: d.states.clone(),
                device_type: d.device_type.clone(),
                location: d.location.clone(),
                sensor: d.sensor.clone(),
            })
        })
        .collect();
    for r in rules {
        let mut pre = Vec::new();
        let mut condition = Vec::new();
        for atom in &r.trigger {
            match atom {
                TriggerAtom::State { device, state } => {
                    let pair = (device.clone(), state.clone());
                    if !pre.contains(&pair) {
                        pre.push(pair);
                    }
                }
                other => condition.push(other.clone()),
            }
        }
        let post = rule_result_list(r, devices).ok()?;
        calls.push(Call::ModelStateTransition(ModelTransition { rule: r.id.clone(), pre, post, condition }));
    }
    let initial = devices
        .iter()
        .filter(|d| !d.is_sensor())
        .filter_map(|d| Some((d.id.clone(), InitialValue::State(d.default_state()?.to_string()))))
        .collect();
    calls.push(Call::DefineInitialState(initial));
    Some(AdapterProgram { calls })
}

fn generate_code(prompt: &Prompt) -> String {
    let rules = prompt.attachment("rule_list").and_then(|a| parse_rule_list(&a.content).ok());
    match (device_list(prompt), rules) {
        (Some(devices), Some(rules)) => match logic_code_for(&devices, &rules) {
            Some(program) => format!("```\n{}```", render_logic_script(&program)),
            None => "Some rule uses an action its device does not have.".into(),
        },
        _ => "The device or rule list is missing or invalid.".into(),
    }
}

/// Repairs `rules` against `conflicts`. For a state or environment conflict
/// the rule with the larger id loses its actions on the conflicting devices;
/// for cascading kinds the triggered rule is dropped. Rules left without
/// actions disappear.
pub fn repair_rules(rules: &[AutomationRule], conflicts: &[ConflictReport]) -> Vec<AutomationRule> {
    let mut out: BTreeMap<String, AutomationRule> = BTreeMap::new();
    let order: Vec<String> = rules.iter().map(|r| r.id.clone()).collect();
    for r in rules {
        out.insert(r.id.clone(), r.clone());
    }
    for c in conflicts {
        match c.kind {
            ConflictKind::StateConflict | ConflictKind::EnvironmentConflict => {
                let Some(loser) = c.rules.iter().max() else { continue };
                if let Some(rule) = out.get_mut(loser) {
                    rule.actions.retain(|a| !c.pair.iter().any(|p| p.device == a.device));
                }
            }
            ConflictKind::StateCascading | ConflictKind::StateEnvCascading => {
                if let Some(t) = &c.triggered_rule {
                    out.remove(t);
                }
            }
        }
    }
    order.iter().filter_map(|id| out.remove(id)).filter(|r| !r.actions.is_empty()).collect()
}

fn optimize_rules(prompt: &Prompt) -> String {
    let rules = prompt.attachment("rule_list").and_then(|a| parse_rule_list(&a.content).ok());
    match (rules, prompt.conflict_information()) {
        (Some(rules), Some(conflicts)) => {
            format!("Updated rules:\n```json\n{}```", serialize_rule_list(&repair_rules(&rules, &conflicts)))
        }
        _ => "The rule list or conflict information is missing or invalid.".into(),
    }
}

impl Backend for MockBackend {
    fn complete(&self, prompt: &Prompt) -> Result<String, BackendError> {
        Ok(match prompt.kind {
            PromptKind::DeviceExtraction => extract_devices(prompt),
            PromptKind::RuleGeneration => generate_rules(prompt),
            PromptKind::CodeGeneration => generate_code(prompt),
            PromptKind::RuleOptimization => optimize_rules(prompt),
        })
    }

    fn describe(&self) -> String {
        "mock".into()
    }
}
