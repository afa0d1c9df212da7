//! Devices, automation rules, triggers and home states.
//!
//! A device is the tuple `(id, type, actions, states, location)` together with a
//! capability map that gives the post-state of every action. A rule is a
//! conjunction of trigger atoms plus an ordered list of `(device, action)`
//! pairs; its result states are read off the capability maps.
//!
//! Sensors are devices bound to an environment variable. Their state is a
//! reading derived from that variable through ascending lower bounds, so they
//! never appear in [`HomeState::device_states`] and are never action targets.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::quantity::Quantity;

/// Name of the environment variable that carries minutes-of-day.
pub const CLOCK: &str = "clock";

/// Minutes in a day; the clock wraps at this value.
pub const MINUTES_PER_DAY: u32 = 1440;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SensorBinding {
    pub variable: String,
    /// `(state, lower bound)` pairs in ascending bound order.
    pub readings: Vec<(String, Quantity)>,
}

impl SensorBinding {
    /// The reading state for `value`: the last state whose lower bound is at
    /// most `value`, or the first state when `value` is below every bound.
    pub fn reading(&self, value: Quantity) -> Option<&str> {
        let mut current = self.readings.first().map(|(s, _)| s.as_str());
        for (state, bound) in &self.readings {
            if *bound <= value {
                current = Some(state.as_str());
            } else {
                break;
            }
        }
        current
    }

    /// Half-open value interval `[lo, hi)` in which `state` is reported.
    /// `None` on either side means unbounded.
    pub fn interval(&self, state: &str) -> Option<(Option<Quantity>, Option<Quantity>)> {
        let pos = self.readings.iter().position(|(s, _)| s == state)?;
        let lo = if pos == 0 { None } else { Some(self.readings[pos].1) };
        let hi = self.readings.get(pos + 1).map(|(_, b)| *b);
        Some((lo, hi))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DeviceSpec {
    pub id: String,
    pub device_type: String,
    pub actions: Vec<String>,
    pub states: Vec<String>,
    pub location: String,
    pub capability: BTreeMap<String, String>,
    pub sensor: Option<SensorBinding>,
    /// Fields this crate does not interpret, kept for round-tripping.
    pub extra: Map<String, Value>,
}

impl DeviceSpec {
    pub fn new(
        id: impl Into<String>,
        device_type: impl Into<String>,
        location: impl Into<String>,
    ) -> Self {
        DeviceSpec {
            id: id.into(),
            device_type: device_type.into(),
            actions: Vec::new(),
            states: Vec::new(),
            location: location.into(),
            capability: BTreeMap::new(),
            sensor: None,
            extra: Map::new(),
        }
    }

    /// Adds an action together with its post-state, registering the state if new.
    pub fn with_action(mut self, action: &str, post_state: &str) -> Self {
        if !self.actions.iter().any(|a| a == action) {
            self.actions.push(action.to_string());
        }
        if !self.states.iter().any(|s| s == post_state) {
            self.states.push(post_state.to_string());
        }
        self.capability.insert(action.to_string(), post_state.to_string());
        self
    }

    pub fn with_states(mut self, states: &[&str]) -> Self {
        for s in states {
            if !self.states.iter().any(|x| x == s) {
                self.states.push(s.to_string());
            }
        }
        self
    }

    pub fn with_sensor(mut self, variable: &str, readings: &[(&str, Quantity)]) -> Self {
        self.sensor = Some(SensorBinding {
            variable: variable.to_string(),
            readings: readings.iter().map(|(s, q)| (s.to_string(), *q)).collect(),
        });
        self.with_states(&readings.iter().map(|(s, _)| *s).collect::<Vec<_>>())
    }

    pub fn is_sensor(&self) -> bool {
        self.sensor.is_some()
    }

    pub fn has_state(&self, state: &str) -> bool {
        self.states.iter().any(|s| s == state)
    }

    pub fn post_state(&self, action: &str) -> Option<&str> {
        self.capability.get(action).map(String::as_str)
    }

    /// The state a device starts in when nothing overrides it.
    pub fn default_state(&self) -> Option<&str> {
        self.states.first().map(String::as_str)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Comparator {
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
}

impl Comparator {
    pub fn holds<T: PartialOrd>(self, lhs: T, rhs: T) -> bool {
        match self {
            Comparator::Lt => lhs < rhs,
            Comparator::Gt => lhs > rhs,
            Comparator::Le => lhs <= rhs,
            Comparator::Ge => lhs >= rhs,
            Comparator::Eq => lhs == rhs,
            Comparator::Ne => lhs != rhs,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Lt => "<",
            Comparator::Gt => ">",
            Comparator::Le => "<=",
            Comparator::Ge => ">=",
            Comparator::Eq => "==",
            Comparator::Ne => "!=",
        }
    }
}

impl fmt::Display for Comparator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TriggerAtom {
    State { device: String, state: String },
    Env { variable: String, cmp: Comparator, value: Quantity },
    /// Minutes of day; holds while the clock is in `[minutes, minutes + tick)`.
    Time { minutes: u32 },
}

impl TriggerAtom {
    pub fn state(device: &str, state: &str) -> Self {
        TriggerAtom::State { device: device.into(), state: state.into() }
    }

    pub fn env(variable: &str, cmp: Comparator, value: impl Into<Quantity>) -> Self {
        TriggerAtom::Env { variable: variable.into(), cmp, value: value.into() }
    }

    pub fn time(hour: u32, minute: u32) -> Self {
        TriggerAtom::Time { minutes: hour * 60 + minute }
    }
}

pub fn format_clock(minutes: u32) -> String {
    format!("{:02}:{:02}", minutes / 60, minutes % 60)
}

pub fn parse_clock(text: &str) -> Option<u32> {
    let (h, m) = text.split_once(':')?;
    if h.is_empty() || h.len() > 2 || m.len() != 2 {
        return None;
    }
    if !h.bytes().all(|b| b.is_ascii_digit()) || !m.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let h: u32 = h.parse().ok()?;
    let m: u32 = m.parse().ok()?;
    (h < 24 && m < 60).then_some(h * 60 + m)
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct RuleAction {
    pub device: String,
    pub action: String,
}

impl RuleAction {
    pub fn new(device: &str, action: &str) -> Self {
        RuleAction { device: device.into(), action: action.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AutomationRule {
    pub id: String,
    pub trigger: Vec<TriggerAtom>,
    pub actions: Vec<RuleAction>,
    pub extra: Map<String, Value>,
}

impl AutomationRule {
    pub fn new(id: impl Into<String>, trigger: Vec<TriggerAtom>, actions: Vec<RuleAction>) -> Self {
        AutomationRule { id: id.into(), trigger, actions, extra: Map::new() }
    }

    /// Devices named by the rule's actions, in action order.
    pub fn action_devices(&self) -> impl Iterator<Item = &str> {
        self.actions.iter().map(|a| a.device.as_str())
    }
}

/// Global assignment of actuator states and environment values.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HomeState {
    pub device_states: BTreeMap<String, String>,
    pub env_values: BTreeMap<String, Quantity>,
}

impl HomeState {
    pub fn clock(&self) -> Option<Quantity> {
        self.env_values.get(CLOCK).copied()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnvVariable {
    pub name: String,
    #[serde(default)]
    pub unit: String,
    pub min: Quantity,
    pub max: Quantity,
    pub granularity: Quantity,
    /// Starting value; the quantized midpoint of `[min, max]` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default: Option<Quantity>,
}

impl EnvVariable {
    pub fn new(name: &str, min: i64, max: i64, granularity: i64) -> Self {
        EnvVariable {
            name: name.into(),
            unit: String::new(),
            min: min.into(),
            max: max.into(),
            granularity: granularity.into(),
            default: None,
        }
    }

    pub fn with_default(mut self, value: impl Into<Quantity>) -> Self {
        self.default = Some(value.into());
        self
    }

    /// Number of grid steps between `min` and `max`.
    pub fn steps(&self) -> i64 {
        ((self.max - self.min) / self.granularity).floor()
    }

    /// Snaps `value` to the nearest grid point and clamps it into range.
    pub fn quantize(&self, value: Quantity) -> Quantity {
        let step = ((value - self.min) / self.granularity).round().clamp(0, self.steps());
        self.min + Quantity::from_integer(step) * self.granularity
    }

    pub fn initial_value(&self) -> Quantity {
        let raw = self
            .default
            .unwrap_or_else(|| (self.min + self.max) / Quantity::from_integer(2));
        self.quantize(raw)
    }

    pub fn contains(&self, value: Quantity) -> bool {
        self.min <= value && value <= self.max
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ResolutionError {
    #[error("unknown device `{0}`")]
    UnknownDevice(String),
    #[error("device `{device}` has no action `{action}`")]
    UnknownAction { device: String, action: String },
    #[error("device `{device}` has no state `{state}`")]
    UnknownState { device: String, state: String },
    #[error("no value for environment variable `{0}`")]
    UnknownVariable(String),
    #[error("no state recorded for device `{0}`")]
    MissingDeviceState(String),
}

/// Device lookup plus the clock granularity needed to evaluate triggers.
#[derive(Clone, Debug)]
pub struct Scope<'a> {
    devices: &'a [DeviceSpec],
    index: HashMap<&'a str, usize>,
    clock_tick: u32,
}

impl<'a> Scope<'a> {
    pub fn new(devices: &'a [DeviceSpec], clock_tick: u32) -> Self {
        let index = devices.iter().enumerate().map(|(i, d)| (d.id.as_str(), i)).collect();
        Scope { devices, index, clock_tick }
    }

    pub fn device(&self, id: &str) -> Option<&'a DeviceSpec> {
        self.index.get(id).map(|&i| &self.devices[i])
    }

    pub fn devices(&self) -> &'a [DeviceSpec] {
        self.devices
    }

    pub fn clock_tick(&self) -> u32 {
        self.clock_tick
    }

    /// True for state atoms on actuators; sensor atoms behave like environment
    /// conditions and are excluded.
    pub fn is_actuator_atom(&self, atom: &TriggerAtom) -> bool {
        match atom {
            TriggerAtom::State { device, .. } => {
                self.device(device).map(|d| !d.is_sensor()).unwrap_or(false)
            }
            _ => false,
        }
    }

    /// The actuator state atoms of a trigger, as `(device, state)` pairs.
    pub fn actuator_atoms<'r>(&self, trigger: &'r [TriggerAtom]) -> Vec<(&'r str, &'r str)> {
        trigger
            .iter()
            .filter(|a| self.is_actuator_atom(a))
            .filter_map(|a| match a {
                TriggerAtom::State { device, state } => Some((device.as_str(), state.as_str())),
                _ => None,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    EmptyId,
    ReservedId,
    DuplicateId,
    EmptyStates,
    DuplicateState,
    DuplicateAction,
    DanglingCapability,
    UnknownCapabilityAction,
    MissingCapability,
    SensorWithActions,
    InvalidReadings,
    EmptyTrigger,
    EmptyActions,
    DuplicateActionDevice,
    UnknownDevice,
    UnknownAction,
    UnknownState,
    UnknownVariable,
    SensorTarget,
    InvalidTime,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Violation {
    /// Device or rule id the violation is about.
    pub subject: String,
    pub kind: ViolationKind,
    pub message: String,
}

impl Violation {
    fn new(subject: &str, kind: ViolationKind, message: impl Into<String>) -> Self {
        Violation { subject: subject.to_string(), kind, message: message.into() }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.subject, self.message)
    }
}

fn duplicates<'a>(items: impl IntoIterator<Item = &'a String>) -> BTreeSet<&'a str> {
    let mut seen = BTreeSet::new();
    let mut dup = BTreeSet::new();
    for item in items {
        if !seen.insert(item.as_str()) {
            dup.insert(item.as_str());
        }
    }
    dup
}

/// Collects every invariant violation in a device list; empty means valid.
pub fn validate_device_list(devices: &[DeviceSpec]) -> Vec<Violation> {
    use ViolationKind::*;
    let mut out = Vec::new();
    for id in duplicates(devices.iter().map(|d| &d.id)) {
        out.push(Violation::new(id, DuplicateId, format!("duplicate device id `{id}`")));
    }
    for d in devices {
        let id = d.id.as_str();
        if id.is_empty() {
            out.push(Violation::new(id, EmptyId, "device id is empty"));
        }
        if id == CLOCK || id == "time" {
            out.push(Violation::new(id, ReservedId, format!("`{id}` is reserved")));
        }
        if d.states.is_empty() {
            out.push(Violation::new(id, EmptyStates, "device has no states"));
        }
        for s in duplicates(&d.states) {
            out.push(Violation::new(id, DuplicateState, format!("state `{s}` listed twice")));
        }
        for a in duplicates(&d.actions) {
            out.push(Violation::new(id, DuplicateAction, format!("action `{a}` listed twice")));
        }
        for (action, state) in &d.capability {
            if !d.actions.contains(action) {
                out.push(Violation::new(
                    id,
                    UnknownCapabilityAction,
                    format!("capability names unknown action `{action}`"),
                ));
            }
            if !d.has_state(state) {
                out.push(Violation::new(
                    id,
                    DanglingCapability,
                    format!("dangling capability target: `{action}` leads to undeclared state `{state}`"),
                ));
            }
        }
        for action in &d.actions {
            if !d.capability.contains_key(action) {
                out.push(Violation::new(
                    id,
                    MissingCapability,
                    format!("action `{action}` has no post-state"),
                ));
            }
        }
        if let Some(sensor) = &d.sensor {
            if !d.actions.is_empty() {
                out.push(Violation::new(id, SensorWithActions, "sensors cannot have actions"));
            }
            let named: BTreeSet<&str> = sensor.readings.iter().map(|(s, _)| s.as_str()).collect();
            let declared: BTreeSet<&str> = d.states.iter().map(String::as_str).collect();
            let ascending = sensor.readings.windows(2).all(|w| w[0].1 < w[1].1);
            if sensor.variable.is_empty()
                || named != declared
                || named.len() != sensor.readings.len()
                || !ascending
            {
                out.push(Violation::new(
                    id,
                    InvalidReadings,
                    "sensor readings must give each state exactly one strictly ascending lower bound",
                ));
            }
        }
    }
    out
}

/// Checks rules against a validated device list and the declared variables.
pub fn validate_rules(
    rules: &[AutomationRule],
    devices: &[DeviceSpec],
    variables: &[EnvVariable],
) -> Vec<Violation> {
    use ViolationKind::*;
    let scope = Scope::new(devices, 1);
    let mut out = Vec::new();
    for id in duplicates(rules.iter().map(|r| &r.id)) {
        out.push(Violation::new(id, DuplicateId, format!("duplicate rule id `{id}`")));
    }
    for rule in rules {
        let rid = rule.id.as_str();
        if rid.is_empty() {
            out.push(Violation::new(rid, EmptyId, "rule id is empty"));
        }
        if rule.trigger.is_empty() {
            out.push(Violation::new(rid, EmptyTrigger, "empty trigger"));
        }
        if rule.actions.is_empty() {
            out.push(Violation::new(rid, EmptyActions, "rule has no actions"));
        }
        let mut targets = BTreeSet::new();
        for act in &rule.actions {
            if !targets.insert(act.device.as_str()) {
                out.push(Violation::new(
                    rid,
                    DuplicateActionDevice,
                    format!("device `{}` is targeted twice", act.device),
                ));
            }
            match scope.device(&act.device) {
                None => out.push(Violation::new(
                    rid,
                    UnknownDevice,
                    format!("unknown device `{}`", act.device),
                )),
                Some(d) if d.is_sensor() => out.push(Violation::new(
                    rid,
                    SensorTarget,
                    format!("sensor `{}` cannot be an action target", act.device),
                )),
                Some(d) if d.post_state(&act.action).is_none() => out.push(Violation::new(
                    rid,
                    UnknownAction,
                    format!("device `{}` has no action `{}`", act.device, act.action),
                )),
                Some(_) => {}
            }
        }
        for atom in &rule.trigger {
            match atom {
                TriggerAtom::State { device, state } => match scope.device(device) {
                    None => out.push(Violation::new(
                        rid,
                        UnknownDevice,
                        format!("trigger names unknown device `{device}`"),
                    )),
                    Some(d) if !d.has_state(state) => out.push(Violation::new(
                        rid,
                        UnknownState,
                        format!("device `{device}` has no state `{state}`"),
                    )),
                    Some(_) => {}
                },
                TriggerAtom::Env { variable, .. } => {
                    if variable != CLOCK && !variables.iter().any(|v| &v.name == variable) {
                        out.push(Violation::new(
                            rid,
                            UnknownVariable,
                            format!("undeclared environment variable `{variable}`"),
                        ));
                    }
                }
                TriggerAtom::Time { minutes } => {
                    if *minutes >= MINUTES_PER_DAY {
                        out.push(Violation::new(rid, InvalidTime, format!("time {minutes} out of range")));
                    }
                }
            }
        }
    }
    out
}

/// Result states in action order.
pub fn rule_result_list(
    rule: &AutomationRule,
    devices: &[DeviceSpec],
) -> Result<Vec<(String, String)>, ResolutionError> {
    let scope = Scope::new(devices, 1);
    rule.actions
        .iter()
        .map(|act| {
            let device = scope
                .device(&act.device)
                .ok_or_else(|| ResolutionError::UnknownDevice(act.device.clone()))?;
            let post = device.post_state(&act.action).ok_or_else(|| ResolutionError::UnknownAction {
                device: act.device.clone(),
                action: act.action.clone(),
            })?;
            Ok((act.device.clone(), post.to_string()))
        })
        .collect()
}

/// The post-state every action of `rule` leaves its device in.
pub fn rule_result_states(
    rule: &AutomationRule,
    devices: &[DeviceSpec],
) -> Result<BTreeMap<String, String>, ResolutionError> {
    Ok(rule_result_list(rule, devices)?.into_iter().collect())
}

fn eval_atom(atom: &TriggerAtom, state: &HomeState, scope: &Scope<'_>) -> Result<bool, ResolutionError> {
    match atom {
        TriggerAtom::State { device, state: wanted } => {
            let spec = scope
                .device(device)
                .ok_or_else(|| ResolutionError::UnknownDevice(device.clone()))?;
            if !spec.has_state(wanted) {
                return Err(ResolutionError::UnknownState { device: device.clone(), state: wanted.clone() });
            }
            match &spec.sensor {
                Some(binding) => {
                    let value = state
                        .env_values
                        .get(&binding.variable)
                        .ok_or_else(|| ResolutionError::UnknownVariable(binding.variable.clone()))?;
                    Ok(binding.reading(*value) == Some(wanted.as_str()))
                }
                None => state
                    .device_states
                    .get(device)
                    .map(|s| s == wanted)
                    .ok_or_else(|| ResolutionError::MissingDeviceState(device.clone())),
            }
        }
        TriggerAtom::Env { variable, cmp, value } => state
            .env_values
            .get(variable)
            .map(|v| cmp.holds(*v, *value))
            .ok_or_else(|| ResolutionError::UnknownVariable(variable.clone())),
        TriggerAtom::Time { minutes } => {
            let clock = state.clock().ok_or_else(|| ResolutionError::UnknownVariable(CLOCK.into()))?;
            let start = Quantity::from(*minutes as i64);
            let end = Quantity::from((*minutes + scope.clock_tick()) as i64);
            Ok(start <= clock && clock < end)
        }
    }
}

/// Evaluates a conjunctive trigger. Every atom is resolved, so a trigger that
/// names an unknown device fails even when an earlier atom is false.
pub fn eval_trigger(
    trigger: &[TriggerAtom],
    state: &HomeState,
    scope: &Scope<'_>,
) -> Result<bool, ResolutionError> {
    trigger
        .iter()
        .try_fold(true, |acc, atom| Ok(eval_atom(atom, state, scope)? && acc))
}
