//! Conversions between call programs and transition systems.

use crate::engine::{build_system, BuildError, TransitionSystem};
use crate::io::{ConflictSpec, StateOverrides};
use crate::model::{rule_result_list, AutomationRule, DeviceSpec, RuleAction, TriggerAtom, CLOCK};
use crate::quantity::Quantity;

use super::script::{AdapterProgram, Call, InitialValue, ModelDevice, ModelTransition, ProgramIssue};

#[derive(Debug, thiserror::Error)]
pub enum ProgramError {
    #[error("{0}")]
    Invalid(ProgramIssue),
    #[error(transparent)]
    Build(#[from] BuildError),
}

/// The call program describing `sys` exactly: every device, one transition
/// per rule in list order, and a complete initial state.
pub fn canonical_program(sys: &TransitionSystem) -> AdapterProgram {
    let mut calls = Vec::new();
    for d in sys.devices() {
        calls.push(Call::ModelDevice(ModelDevice {
            id: d.id.clone(),
            states: d.states.clone(),
            device_type: d.device_type.clone(),
            location: d.location.clone(),
            sensor: d.sensor.clone(),
        }));
    }
    for r in sys.rules() {
        let mut pre: Vec<(String, String)> = Vec::new();
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
        let post = rule_result_list(r, sys.devices()).expect("validated rules resolve");
        calls.push(Call::ModelStateTransition(ModelTransition { rule: r.id.clone(), pre, post, condition }));
    }
    let init = sys.initial();
    let mut assignments: Vec<(String, InitialValue)> = init
        .device_states
        .iter()
        .map(|(d, s)| (d.clone(), InitialValue::State(s.clone())))
        .collect();
    for v in &sys.spec().env_vars {
        assignments.push((v.name.clone(), InitialValue::Number(init.env_values[&v.name])));
    }
    let minutes = init.clock().expect("systems carry a clock").numer() as u32;
    assignments.push((CLOCK.to_string(), InitialValue::Clock(minutes)));
    calls.push(Call::DefineInitialState(assignments));
    AdapterProgram { calls }
}

fn action_for(state: &str) -> String {
    format!("to_{state}")
}

impl AdapterProgram {
    /// Builds the transition system the program describes. Devices get one
    /// synthetic action per state they are driven into.
    pub fn to_system(&self, spec: &ConflictSpec) -> Result<TransitionSystem, ProgramError> {
        self.validate().map_err(ProgramError::Invalid)?;
        let mut devices: Vec<DeviceSpec> = self
            .devices()
            .map(|m| {
                let mut d = DeviceSpec::new(m.id.clone(), m.device_type.clone(), m.location.clone());
                d.states = m.states.clone();
                d.sensor = m.sensor.clone();
                d
            })
            .collect();
        let rules: Vec<AutomationRule> = self
            .transitions()
            .map(|t| {
                let mut trigger: Vec<TriggerAtom> = t.pre.iter().map(|(d, s)| TriggerAtom::state(d, s)).collect();
                trigger.extend(t.condition.iter().cloned());
                let actions = t.post.iter().map(|(d, s)| RuleAction::new(d, &action_for(s))).collect();
                AutomationRule::new(t.rule.clone(), trigger, actions)
            })
            .collect();
        for r in &rules {
            for a in &r.actions {
                let d = devices.iter_mut().find(|d| d.id == a.device).expect("validated device");
                if !d.actions.contains(&a.action) {
                    let state = a.action.strip_prefix("to_").expect("synthetic action");
                    d.actions.push(a.action.clone());
                    d.capability.insert(a.action.clone(), state.to_string());
                }
            }
        }
        let mut overrides = StateOverrides::default();
        for (key, value) in self.initial() {
            overrides = match value {
                InitialValue::State(s) => overrides.device(key, s),
                InitialValue::Number(q) => overrides.env(key, *q),
                InitialValue::Clock(m) => overrides.env(key, Quantity::from(*m as i64)),
            };
        }
        Ok(build_system(&devices, &rules, spec, &overrides)?)
    }
}
