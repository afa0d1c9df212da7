//! Compilation of devices, rules and an environment model into a finite
//! transition system.
//!
//! Internally a state is packed into one `u32` per slot: actuator state
//! indices first, then environment variables as grid steps above `min`, then
//! the clock as a step index (`minutes = k * clock_tick`).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::io::{ConflictSpec, StateOverrides};
use crate::model::{
    validate_device_list, validate_rules, AutomationRule, Comparator, DeviceSpec, HomeState, TriggerAtom, Violation,
    CLOCK, MINUTES_PER_DAY,
};
use crate::quantity::Quantity;

pub(crate) type Packed = Box<[u32]>;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum BuildError {
    #[error("invalid input: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("invalid conflict spec: {0}")]
    Spec(String),
    #[error("unknown device {0}")]
    UnknownDevice(String),
    #[error("unknown variable {0}")]
    UnknownVariable(String),
    #[error("device `{device}` has no state `{state}`")]
    UnknownState { device: String, state: String },
    #[error("value {value} for `{variable}` is out of range")]
    OutOfRange { variable: String, value: Quantity },
    #[error("`{0}` is a device; give it a state name")]
    ExpectedState(String),
    #[error("`{0}` is an environment variable; give it a number")]
    ExpectedNumber(String),
}

fn join(violations: &[Violation]) -> String {
    violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("unknown rule `{0}`")]
    UnknownRule(String),
    #[error("rule `{0}` is not enabled in this state")]
    Disabled(String),
    #[error("state is outside the system: {0}")]
    ForeignState(String),
    #[error("trace step {step} does not follow from its predecessor")]
    BrokenTrace { step: usize },
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionKind {
    RuleFire(String),
    EnvTick,
}

impl fmt::Display for TransitionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TransitionKind::RuleFire(id) => write!(f, "fire {id}"),
            TransitionKind::EnvTick => f.write_str("tick"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Transition {
    pub kind: TransitionKind,
    pub source: HomeState,
    pub target: HomeState,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Step {
    pub transition: TransitionKind,
    pub state: HomeState,
}

/// A path from the initial state; each step records the state it produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trace {
    pub initial: HomeState,
    pub steps: Vec<Step>,
}

impl Trace {
    pub fn depth(&self) -> usize {
        self.steps.len()
    }

    pub fn final_state(&self) -> &HomeState {
        self.steps.last().map(|s| &s.state).unwrap_or(&self.initial)
    }

    pub fn transitions(&self) -> Vec<Transition> {
        let mut source = &self.initial;
        self.steps
            .iter()
            .map(|s| {
                let t = Transition { kind: s.transition.clone(), source: source.clone(), target: s.state.clone() };
                source = &s.state;
                t
            })
            .collect()
    }
}

/// A compiled trigger atom over packed states.
#[derive(Clone, Debug)]
pub(crate) enum Cond {
    Is(usize, u32),
    Table(usize, Vec<bool>),
}

impl Cond {
    pub(crate) fn holds(&self, s: &[u32]) -> bool {
        match self {
            Cond::Is(slot, v) => s[*slot] == *v,
            Cond::Table(slot, table) => table[s[*slot] as usize],
        }
    }
}

pub(crate) fn all_hold(conds: &[Cond], s: &[u32]) -> bool {
    conds.iter().all(|c| c.holds(s))
}

#[derive(Clone, Debug)]
struct CompiledRule {
    trigger: Vec<Cond>,
    actions: Vec<(usize, u32)>,
}

#[derive(Clone, Debug)]
pub struct TransitionSystem {
    devices: Vec<DeviceSpec>,
    rules: Vec<AutomationRule>,
    spec: ConflictSpec,
    initial: HomeState,
    /// Device indices of actuators, in device-list order.
    actuators: Vec<usize>,
    clock_steps: u32,
    /// Per actuator slot and state index: `(env slot, delta in grid steps)`.
    effects: Vec<Vec<Vec<(usize, i64)>>>,
    compiled: Vec<CompiledRule>,
    /// Rule indices in lexicographic id order.
    order: Vec<usize>,
    initial_packed: Packed,
}

/// Builds the system and its initial state: first-listed device states,
/// variable defaults and clock 00:00, each replaceable by an override.
pub fn build_system(
    devices: &[DeviceSpec],
    rules: &[AutomationRule],
    spec: &ConflictSpec,
    overrides: &StateOverrides,
) -> Result<TransitionSystem, BuildError> {
    spec.validate().map_err(BuildError::Spec)?;
    let mut violations = validate_device_list(devices);
    if violations.is_empty() {
        violations = validate_rules(rules, devices, &spec.env_vars);
    }
    if !violations.is_empty() {
        return Err(BuildError::Invalid(violations));
    }
    for d in devices {
        if let Some(sensor) = &d.sensor {
            if spec.variable(&sensor.variable).is_none() {
                return Err(BuildError::Spec(format!(
                    "sensor `{}` reports undeclared environment variable `{}`",
                    d.id, sensor.variable
                )));
            }
        }
    }
    for e in &spec.effects {
        let of_type: Vec<&DeviceSpec> = devices.iter().filter(|d| d.device_type == e.device_type).collect();
        if !of_type.is_empty() && !of_type.iter().any(|d| d.has_state(&e.state)) {
            return Err(BuildError::Spec(format!(
                "effect names state `{}`, which no `{}` device declares",
                e.state, e.device_type
            )));
        }
    }

    let actuators: Vec<usize> = devices.iter().enumerate().filter(|(_, d)| !d.is_sensor()).map(|(i, _)| i).collect();
    let n_act = actuators.len();
    let clock_slot = n_act + spec.env_vars.len();
    let clock_steps = MINUTES_PER_DAY / spec.clock_tick;

    let effects = actuators
        .iter()
        .map(|&di| {
            let d = &devices[di];
            d.states
                .iter()
                .map(|s| {
                    spec.effects_of(&d.device_type, s)
                        .map(|e| {
                            let j = spec.env_vars.iter().position(|v| v.name == e.variable).expect("validated");
                            (n_act + j, (e.delta_per_tick / spec.env_vars[j].granularity).round())
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut system = TransitionSystem {
        devices: devices.to_vec(),
        rules: rules.to_vec(),
        spec: spec.clone(),
        initial: HomeState::default(),
        actuators,
        clock_steps,
        effects,
        compiled: Vec::new(),
        order: Vec::new(),
        initial_packed: Vec::new().into_boxed_slice(),
    };
    system.compiled = rules
        .iter()
        .map(|r| {
            let trigger = system.compile_atoms(&r.trigger);
            let actions = r
                .actions
                .iter()
                .map(|a| {
                    let slot = system.actuator_slot(&a.device).expect("validated target");
                    let d = &devices[system.actuators[slot]];
                    let post = d.post_state(&a.action).expect("validated action");
                    (slot, state_index(d, post))
                })
                .collect();
            CompiledRule { trigger, actions }
        })
        .collect();
    let mut order: Vec<usize> = (0..rules.len()).collect();
    order.sort_by(|&a, &b| rules[a].id.cmp(&rules[b].id));
    system.order = order;

    let mut packed = vec![0u32; clock_slot + 1];
    for (slot, &di) in system.actuators.iter().enumerate() {
        let d = &devices[di];
        packed[slot] = match overrides.devices.get(&d.id) {
            Some(s) if d.has_state(s) => state_index(d, s),
            Some(s) => return Err(BuildError::UnknownState { device: d.id.clone(), state: s.clone() }),
            None => 0,
        };
    }
    for (j, v) in spec.env_vars.iter().enumerate() {
        packed[n_act + j] = ((v.initial_value() - v.min) / v.granularity).round() as u32;
    }
    for (key, state) in &overrides.devices {
        let d = devices.iter().find(|d| &d.id == key);
        match d {
            None if spec.variable(key).is_some() => return Err(BuildError::ExpectedNumber(key.clone())),
            None => return Err(BuildError::UnknownDevice(key.clone())),
            Some(d) => {
                if let Some(sensor) = &d.sensor {
                    let (lo, _) = sensor.interval(state).ok_or_else(|| BuildError::UnknownState {
                        device: d.id.clone(),
                        state: state.clone(),
                    })?;
                    let j = spec.env_vars.iter().position(|v| v.name == sensor.variable).expect("checked above");
                    let var = &spec.env_vars[j];
                    let k = match lo {
                        None => 0,
                        Some(lo) => ((lo - var.min) / var.granularity).ceil().max(0),
                    };
                    let value = var.min + Quantity::from(k) * var.granularity;
                    if k > var.steps() || sensor.reading(value) != Some(state.as_str()) {
                        return Err(BuildError::OutOfRange { variable: var.name.clone(), value });
                    }
                    packed[n_act + j] = k as u32;
                }
            }
        }
    }
    for (name, value) in &overrides.env {
        if name == CLOCK {
            if value.is_negative() || *value >= Quantity::from(MINUTES_PER_DAY as i64) {
                return Err(BuildError::OutOfRange { variable: CLOCK.into(), value: *value });
            }
            packed[clock_slot] = (value.floor() / spec.clock_tick as i64) as u32;
            continue;
        }
        if devices.iter().any(|d| &d.id == name) {
            return Err(BuildError::ExpectedState(name.clone()));
        }
        let j = spec
            .env_vars
            .iter()
            .position(|v| &v.name == name)
            .ok_or_else(|| BuildError::UnknownVariable(name.clone()))?;
        let var = &spec.env_vars[j];
        if !var.contains(*value) {
            return Err(BuildError::OutOfRange { variable: name.clone(), value: *value });
        }
        packed[n_act + j] = ((var.quantize(*value) - var.min) / var.granularity).round() as u32;
    }
    system.initial_packed = packed.into_boxed_slice();
    system.initial = system.decode(&system.initial_packed);
    Ok(system)
}

fn state_index(d: &DeviceSpec, state: &str) -> u32 {
    d.states.iter().position(|s| s == state).expect("declared state") as u32
}

impl TransitionSystem {
    pub fn devices(&self) -> &[DeviceSpec] {
        &self.devices
    }

    pub fn rules(&self) -> &[AutomationRule] {
        &self.rules
    }

    pub fn spec(&self) -> &ConflictSpec {
        &self.spec
    }

    pub fn initial(&self) -> &HomeState {
        &self.initial
    }

    pub fn depth_bound(&self) -> usize {
        self.spec.depth_bound
    }

    pub fn rule(&self, id: &str) -> Option<&AutomationRule> {
        self.rules.iter().find(|r| r.id == id)
    }

    /// Rules in lexicographic id order.
    pub fn rules_by_id(&self) -> impl Iterator<Item = &AutomationRule> {
        self.order.iter().map(|&i| &self.rules[i])
    }

    pub fn device(&self, id: &str) -> Option<&DeviceSpec> {
        self.devices.iter().find(|d| d.id == id)
    }

    pub(crate) fn rule_index(&self, id: &str) -> Option<usize> {
        self.rules.iter().position(|r| r.id == id)
    }

    pub(crate) fn actuator_slot(&self, id: &str) -> Option<usize> {
        self.actuators.iter().position(|&di| self.devices[di].id == id)
    }

    pub(crate) fn env_slot(&self, name: &str) -> Option<usize> {
        if name == CLOCK {
            return Some(self.clock_slot());
        }
        self.spec.env_vars.iter().position(|v| v.name == name).map(|j| self.actuators.len() + j)
    }

    fn clock_slot(&self) -> usize {
        self.actuators.len() + self.spec.env_vars.len()
    }

    /// Number of states per slot, i.e. the packed state-space shape.
    pub fn slot_sizes(&self) -> Vec<u64> {
        let mut sizes: Vec<u64> =
            self.actuators.iter().map(|&di| self.devices[di].states.len() as u64).collect();
        sizes.extend(self.spec.env_vars.iter().map(|v| v.steps() as u64 + 1));
        sizes.push(self.clock_steps as u64);
        sizes
    }

    /// Upper bound on the number of distinct states.
    pub fn state_space_bound(&self) -> u128 {
        self.slot_sizes().iter().map(|&n| n as u128).product()
    }

    /// Compiles atoms to slot conditions. Atoms are assumed validated.
    pub(crate) fn compile_atoms(&self, atoms: &[TriggerAtom]) -> Vec<Cond> {
        atoms.iter().map(|a| self.compile_atom(a)).collect()
    }

    fn compile_atom(&self, atom: &TriggerAtom) -> Cond {
        match atom {
            TriggerAtom::State { device, state } => {
                if let Some(slot) = self.actuator_slot(device) {
                    let d = &self.devices[self.actuators[slot]];
                    return Cond::Is(slot, state_index(d, state));
                }
                let d = self.device(device).expect("validated device");
                let sensor = d.sensor.as_ref().expect("non-actuator devices are sensors");
                let slot = self.env_slot(&sensor.variable).expect("declared variable");
                let table = self.slot_values(slot).map(|v| sensor.reading(v) == Some(state.as_str())).collect();
                Cond::Table(slot, table)
            }
            TriggerAtom::Env { variable, cmp, value } => {
                let slot = self.env_slot(variable).expect("declared variable");
                Cond::Table(slot, self.slot_values(slot).map(|v| cmp.holds(v, *value)).collect())
            }
            TriggerAtom::Time { minutes } => {
                let slot = self.clock_slot();
                let start = Quantity::from(*minutes as i64);
                let end = Quantity::from((*minutes + self.spec.clock_tick) as i64);
                let table = self
                    .slot_values(slot)
                    .map(|v| Comparator::Ge.holds(v, start) && Comparator::Lt.holds(v, end))
                    .collect();
                Cond::Table(slot, table)
            }
        }
    }

    /// The value each step of an environment or clock slot stands for.
    fn slot_values(&self, slot: usize) -> impl Iterator<Item = Quantity> + '_ {
        let n_act = self.actuators.len();
        let (base, step, count) = if slot == self.clock_slot() {
            (Quantity::ZERO, Quantity::from(self.spec.clock_tick as i64), self.clock_steps as i64)
        } else {
            let v = &self.spec.env_vars[slot - n_act];
            (v.min, v.granularity, v.steps() + 1)
        };
        (0..count).map(move |k| base + Quantity::from(k) * step)
    }

    pub(crate) fn decode(&self, s: &[u32]) -> HomeState {
        let n_act = self.actuators.len();
        let device_states: BTreeMap<String, String> = self
            .actuators
            .iter()
            .enumerate()
            .map(|(slot, &di)| {
                let d = &self.devices[di];
                (d.id.clone(), d.states[s[slot] as usize].clone())
            })
            .collect();
        let mut env_values: BTreeMap<String, Quantity> = self
            .spec
            .env_vars
            .iter()
            .enumerate()
            .map(|(j, v)| (v.name.clone(), v.min + Quantity::from(s[n_act + j] as i64) * v.granularity))
            .collect();
        env_values.insert(
            CLOCK.to_string(),
            Quantity::from(s[self.clock_slot()] as i64 * self.spec.clock_tick as i64),
        );
        HomeState { device_states, env_values }
    }

    pub(crate) fn encode(&self, state: &HomeState) -> Result<Packed, EngineError> {
        let foreign = |m: String| EngineError::ForeignState(m);
        let n_act = self.actuators.len();
        let expected_env = self.spec.env_vars.len() + 1;
        if state.device_states.len() != n_act || state.env_values.len() != expected_env {
            return Err(foreign("wrong set of devices or variables".into()));
        }
        let mut out = vec![0u32; self.clock_slot() + 1];
        for (slot, &di) in self.actuators.iter().enumerate() {
            let d = &self.devices[di];
            let s = state.device_states.get(&d.id).ok_or_else(|| foreign(format!("missing device `{}`", d.id)))?;
            if !d.has_state(s) {
                return Err(foreign(format!("`{}` has no state `{s}`", d.id)));
            }
            out[slot] = state_index(d, s);
        }
        for (j, v) in self.spec.env_vars.iter().enumerate() {
            let value = *state.env_values.get(&v.name).ok_or_else(|| foreign(format!("missing `{}`", v.name)))?;
            let k = (value - v.min) / v.granularity;
            if !v.contains(value) || !k.is_integer() {
                return Err(foreign(format!("`{}` = {value} is off the grid", v.name)));
            }
            out[n_act + j] = k.numer() as u32;
        }
        let clock = state.clock().ok_or_else(|| foreign("missing clock".into()))?;
        let k = clock / Quantity::from(self.spec.clock_tick as i64);
        if !k.is_integer() || k.is_negative() || k.numer() >= self.clock_steps as i64 {
            return Err(foreign(format!("clock {clock} is off the grid")));
        }
        out[self.clock_slot()] = k.numer() as u32;
        Ok(out.into_boxed_slice())
    }

    pub(crate) fn initial_packed(&self) -> &[u32] {
        &self.initial_packed
    }

    fn is_noop(&self, rule: usize, s: &[u32]) -> bool {
        self.compiled[rule].actions.iter().all(|&(slot, v)| s[slot] == v)
    }

    pub(crate) fn trigger_holds(&self, rule: usize, s: &[u32]) -> bool {
        all_hold(&self.compiled[rule].trigger, s)
    }

    pub(crate) fn is_enabled_packed(&self, rule: usize, s: &[u32]) -> bool {
        self.trigger_holds(rule, s) && !self.is_noop(rule, s)
    }

    /// Enabled rule indices in id order.
    pub(crate) fn enabled_packed<'a>(&'a self, s: &'a [u32]) -> impl Iterator<Item = usize> + 'a {
        self.order.iter().copied().filter(move |&r| self.is_enabled_packed(r, s))
    }

    pub(crate) fn fire_packed(&self, rule: usize, s: &[u32]) -> Packed {
        let mut out: Packed = s.into();
        for &(slot, v) in &self.compiled[rule].actions {
            out[slot] = v;
        }
        out
    }

    pub(crate) fn tick_packed(&self, s: &[u32]) -> Packed {
        let n_act = self.actuators.len();
        let mut deltas = vec![0i64; self.spec.env_vars.len()];
        for slot in 0..n_act {
            for &(env_slot, d) in &self.effects[slot][s[slot] as usize] {
                deltas[env_slot - n_act] += d;
            }
        }
        let mut out: Packed = s.into();
        for (j, v) in self.spec.env_vars.iter().enumerate() {
            out[n_act + j] = (s[n_act + j] as i64 + deltas[j]).clamp(0, v.steps()) as u32;
        }
        let c = self.clock_slot();
        out[c] = (s[c] + 1) % self.clock_steps;
        out
    }

    /// Successors in exploration order: enabled rules by id, then the tick.
    pub(crate) fn successors(&self, s: &[u32]) -> Vec<(Option<usize>, Packed)> {
        let mut out: Vec<(Option<usize>, Packed)> =
            self.enabled_packed(s).map(|r| (Some(r), self.fire_packed(r, s))).collect();
        out.push((None, self.tick_packed(s)));
        out
    }

    pub(crate) fn kind_of(&self, rule: Option<usize>) -> TransitionKind {
        match rule {
            Some(r) => TransitionKind::RuleFire(self.rules[r].id.clone()),
            None => TransitionKind::EnvTick,
        }
    }

    /// Ids of the rules enabled in `state`, in id order. A rule is enabled when
    /// its trigger holds and firing it would change at least one device.
    pub fn enabled_rules(&self, state: &HomeState) -> Result<Vec<String>, EngineError> {
        let s = self.encode(state)?;
        Ok(self.enabled_packed(&s).map(|r| self.rules[r].id.clone()).collect())
    }

    pub fn apply_rule(&self, state: &HomeState, rule_id: &str) -> Result<HomeState, EngineError> {
        let r = self.rule_index(rule_id).ok_or_else(|| EngineError::UnknownRule(rule_id.into()))?;
        let s = self.encode(state)?;
        if !self.is_enabled_packed(r, &s) {
            return Err(EngineError::Disabled(rule_id.into()));
        }
        Ok(self.decode(&self.fire_packed(r, &s)))
    }

    pub fn env_tick(&self, state: &HomeState) -> Result<HomeState, EngineError> {
        let s = self.encode(state)?;
        Ok(self.decode(&self.tick_packed(&s)))
    }

    pub fn step(&self, state: &HomeState, kind: &TransitionKind) -> Result<HomeState, EngineError> {
        match kind {
            TransitionKind::RuleFire(id) => self.apply_rule(state, id),
            TransitionKind::EnvTick => self.env_tick(state),
        }
    }

    /// Replays a trace from its initial state and returns the final state,
    /// failing if any recorded state disagrees with the recomputed one.
    pub fn replay(&self, trace: &Trace) -> Result<HomeState, EngineError> {
        let mut current = trace.initial.clone();
        for (i, step) in trace.steps.iter().enumerate() {
            let next = self.step(&current, &step.transition)?;
            if next != step.state {
                return Err(EngineError::BrokenTrace { step: i + 1 });
            }
            current = next;
        }
        Ok(current)
    }

    /// Whether `state` is a state of this system (all slots on their grids).
    pub fn contains_state(&self, state: &HomeState) -> bool {
        self.encode(state).is_ok()
    }
}
