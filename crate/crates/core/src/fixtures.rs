//! Reference homes used by tests, benches and the CLI examples.
//!
//! | name         | expected verdict                                              |
//! |--------------|---------------------------------------------------------------|
//! | `heater_ac`  | EnvironmentConflict on temperature, StateEnvCascading heater  |
//! | `light`      | one StateConflict on (low, high)                              |
//! | `desk_lamp`  | EnvironmentConflict on illuminance                            |
//! | `case_study` | no conflict; 10 devices, 10 rules                             |

use crate::engine::{build_system, BuildError, TransitionSystem};
use crate::io::{parse_conflict_spec, parse_device_list, parse_overrides, parse_rule_list, ParseError};
use crate::io::{ConflictSpec, StateOverrides};
use crate::model::{AutomationRule, DeviceSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FixtureText {
    pub name: &'static str,
    pub devices: &'static str,
    pub rules: &'static str,
    pub spec: &'static str,
    pub overrides: &'static str,
}

macro_rules! fixture {
    ($name:literal) => {
        FixtureText {
            name: $name,
            devices: include_str!(concat!("../fixtures/", $name, "/devices.json")),
            rules: include_str!(concat!("../fixtures/", $name, "/rules.json")),
            spec: include_str!(concat!("../fixtures/", $name, "/spec.json")),
            overrides: include_str!(concat!("../fixtures/", $name, "/overrides.json")),
        }
    };
}

pub const HEATER_AC: FixtureText = fixture!("heater_ac");
pub const LIGHT: FixtureText = fixture!("light");
pub const DESK_LAMP: FixtureText = fixture!("desk_lamp");
pub const CASE_STUDY: FixtureText = fixture!("case_study");

pub const ALL: [FixtureText; 4] = [HEATER_AC, LIGHT, DESK_LAMP, CASE_STUDY];

#[derive(Clone, Debug)]
pub struct Fixture {
    pub name: &'static str,
    pub devices: Vec<DeviceSpec>,
    pub rules: Vec<AutomationRule>,
    pub spec: ConflictSpec,
    pub overrides: StateOverrides,
}

#[derive(Debug, thiserror::Error)]
pub enum FixtureError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Build(#[from] BuildError),
}

impl FixtureText {
    pub fn parse(&self) -> Result<Fixture, ParseError> {
        Ok(Fixture {
            name: self.name,
            devices: parse_device_list(self.devices)?,
            rules: parse_rule_list(self.rules)?,
            spec: parse_conflict_spec(self.spec)?,
            overrides: parse_overrides(self.overrides)?,
        })
    }

    pub fn system(&self) -> Result<TransitionSystem, FixtureError> {
        Ok(self.parse()?.system()?)
    }
}

impl Fixture {
    pub fn system(&self) -> Result<TransitionSystem, BuildError> {
        build_system(&self.devices, &self.rules, &self.spec, &self.overrides)
    }
}

pub fn by_name(name: &str) -> Option<FixtureText> {
    ALL.into_iter().find(|f| f.name == name)
}
