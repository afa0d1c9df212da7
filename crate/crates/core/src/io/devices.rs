//! The device-list JSON document.
//!
//! ```json
//! {"lamp1": {"type": "light", "action": ["turn_on", "turn_off"], "state": ["off", "on"],
//!            "location": "room1"}}
//! ```
//!
//! Optional per-device fields: `capability` (action → post-state), `sensor_of`
//! (environment variable) and `readings` (state → lower bound, sensors only).

use std::collections::BTreeMap;

use serde_json::{Map, Value};

use super::{json_error, object_of, ParseError};
use crate::model::{DeviceSpec, SensorBinding};
use crate::quantity::Quantity;

const KNOWN_FIELDS: [&str; 7] = ["type", "action", "state", "location", "capability", "sensor_of", "readings"];

/// The post-state an action name implies by convention, if any.
///
/// `turn_on`→`on`, `turn_off`→`off`, `dim`→`low`, `brighten`→`high`, and
/// `start_X`→`Xing` when that state is declared.
pub fn synthesize_capability(action: &str, states: &[String]) -> Option<String> {
    let candidate = match action {
        "turn_on" => "on".to_string(),
        "turn_off" => "off".to_string(),
        "dim" => "low".to_string(),
        "brighten" => "high".to_string(),
        _ => {
            let stem = action.strip_prefix("start_")?;
            // `start_charge` → `charging`
            let elided = stem.strip_suffix('e').map(|s| format!("{s}ing"));
            let plain = format!("{stem}ing");
            match elided {
                Some(e) if !states.contains(&plain) => e,
                _ => plain,
            }
        }
    };
    states.iter().any(|s| s == &candidate).then_some(candidate)
}

fn schema(device: &str, message: impl Into<String>) -> ParseError {
    ParseError::DeviceSchema { device: device.to_string(), message: message.into() }
}

fn string_field(obj: &Map<String, Value>, id: &str, field: &str) -> Result<Option<String>, ParseError> {
    match obj.get(field) {
        None => Ok(None),
        Some(Value::String(s)) => Ok(Some(s.clone())),
        Some(_) => Err(schema(id, format!("field `{field}` must be a string"))),
    }
}

fn string_list(obj: &Map<String, Value>, id: &str, field: &str) -> Result<Vec<String>, ParseError> {
    let value = obj.get(field).ok_or_else(|| schema(id, format!("missing field `{field}`")))?;
    let items = value
        .as_array()
        .ok_or_else(|| schema(id, format!("field `{field}` must be an array of strings")))?;
    items
        .iter()
        .map(|v| {
            v.as_str()
                .map(str::to_string)
                .ok_or_else(|| schema(id, format!("field `{field}` must be an array of strings")))
        })
        .collect()
}

fn parse_device(id: &str, value: &Value) -> Result<DeviceSpec, ParseError> {
    let obj = value.as_object().ok_or_else(|| schema(id, "device entry must be an object"))?;
    let device_type = string_field(obj, id, "type")?.ok_or_else(|| schema(id, "missing field `type`"))?;
    let actions = string_list(obj, id, "action")?;
    let states = string_list(obj, id, "state")?;
    let location = string_field(obj, id, "location")?.unwrap_or_default();

    let mut capability = BTreeMap::new();
    if let Some(cap) = obj.get("capability") {
        let cap = cap.as_object().ok_or_else(|| schema(id, "field `capability` must be an object"))?;
        for (action, post) in cap {
            let post = post
                .as_str()
                .ok_or_else(|| schema(id, format!("capability `{action}` must map to a state name")))?;
            capability.insert(action.clone(), post.to_string());
        }
    }
    for action in &actions {
        if capability.contains_key(action) {
            continue;
        }
        let post = synthesize_capability(action, &states).ok_or_else(|| {
            schema(id, format!("action `{action}` has no conventional post-state; list it under `capability`"))
        })?;
        capability.insert(action.clone(), post);
    }

    let sensor = match string_field(obj, id, "sensor_of")? {
        None => {
            if obj.contains_key("readings") {
                return Err(schema(id, "field `readings` requires `sensor_of`"));
            }
            None
        }
        Some(variable) => {
            let readings = obj
                .get("readings")
                .ok_or_else(|| schema(id, "missing field `readings` for sensor"))?
                .as_object()
                .ok_or_else(|| schema(id, "field `readings` must be an object"))?;
            let mut list = Vec::new();
            for (state, bound) in readings {
                let bound: Quantity = serde_json::from_value(bound.clone())
                    .map_err(|_| schema(id, format!("reading bound for `{state}` must be a number")))?;
                list.push((state.clone(), bound));
            }
            list.sort_by(|a, b| a.1.cmp(&b.1));
            Some(SensorBinding { variable, readings: list })
        }
    };

    let extra = obj
        .iter()
        .filter(|(k, _)| !KNOWN_FIELDS.contains(&k.as_str()))
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();

    Ok(DeviceSpec { id: id.to_string(), device_type, actions, states, location, capability, sensor, extra })
}

/// Parses a device-list document, one device per top-level key in document order.
pub fn parse_device_list(text: &str) -> Result<Vec<DeviceSpec>, ParseError> {
    let root: Value = serde_json::from_str(text).map_err(json_error)?;
    let obj = object_of(&root, "device list")?;
    obj.iter().map(|(id, v)| parse_device(id, v)).collect()
}

fn device_value(d: &DeviceSpec) -> Value {
    let mut obj = Map::new();
    obj.insert("type".into(), Value::String(d.device_type.clone()));
    obj.insert("action".into(), Value::from(d.actions.clone()));
    obj.insert("state".into(), Value::from(d.states.clone()));
    obj.insert("location".into(), Value::String(d.location.clone()));
    let explicit: Map<String, Value> = d
        .capability
        .iter()
        .filter(|(a, post)| synthesize_capability(a, &d.states).as_ref() != Some(*post) || !d.actions.contains(a))
        .map(|(a, post)| (a.clone(), Value::String(post.clone())))
        .collect();
    if !explicit.is_empty() {
        obj.insert("capability".into(), Value::Object(explicit));
    }
    if let Some(sensor) = &d.sensor {
        obj.insert("sensor_of".into(), Value::String(sensor.variable.clone()));
        let readings: Map<String, Value> = sensor
            .readings
            .iter()
            .map(|(s, b)| (s.clone(), serde_json::to_value(b).expect("quantity serializes")))
            .collect();
        obj.insert("readings".into(), Value::Object(readings));
    }
    for (k, v) in &d.extra {
        obj.insert(k.clone(), v.clone());
    }
    Value::Object(obj)
}

/// Serializes devices in list order with a fixed field order. Capability
/// entries that the naming convention already implies are omitted.
pub fn serialize_device_list(devices: &[DeviceSpec]) -> String {
    let obj: Map<String, Value> = devices.iter().map(|d| (d.id.clone(), device_value(d))).collect();
    super::pretty(&Value::Object(obj))
}

/// A device as it arrives before extraction: id, type and maybe a location.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PartialDevice {
    pub id: String,
    pub device_type: String,
    pub location: Option<String>,
}

pub fn parse_incomplete_device_list(text: &str) -> Result<Vec<PartialDevice>, ParseError> {
    let root: Value = serde_json::from_str(text).map_err(json_error)?;
    let obj = object_of(&root, "device list")?;
    obj.iter()
        .map(|(id, v)| {
            let entry = v.as_object().ok_or_else(|| schema(id, "device entry must be an object"))?;
            Ok(PartialDevice {
                id: id.clone(),
                device_type: string_field(entry, id, "type")?.ok_or_else(|| schema(id, "missing field `type`"))?,
                location: string_field(entry, id, "location")?,
            })
        })
        .collect()
}

pub fn serialize_incomplete_device_list(devices: &[PartialDevice]) -> String {
    let obj: Map<String, Value> = devices
        .iter()
        .map(|d| {
            let mut entry = Map::new();
            entry.insert("type".into(), Value::String(d.device_type.clone()));
            if let Some(loc) = &d.location {
                entry.insert("location".into(), Value::String(loc.clone()));
            }
            (d.id.clone(), Value::Object(entry))
        })
        .collect();
    super::pretty(&Value::Object(obj))
}
