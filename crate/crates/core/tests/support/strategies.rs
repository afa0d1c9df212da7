//! Generators for canonical documents and the error-position check.

use proptest::prelude::*;

use homerule::io::ParseError;
use homerule::model::{AutomationRule, Comparator, DeviceSpec, RuleAction, TriggerAtom, CLOCK, MINUTES_PER_DAY};
use homerule::quantity::Quantity;

pub fn ident() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_]{0,7}".prop_filter("reserved words", |s| s != "time" && s != CLOCK)
}

pub fn quantity() -> impl Strategy<Value = Quantity> {
    (-500i64..500, prop::sample::select(vec![1i64, 2, 3, 4, 5, 8, 10])).prop_map(|(n, d)| Quantity::new(n, d))
}

pub fn atom() -> impl Strategy<Value = TriggerAtom> {
    let cmp = prop::sample::select(vec![Comparator::Lt, Comparator::Gt, Comparator::Le, Comparator::Ge, Comparator::Eq, Comparator::Ne]);
    prop_oneof![
        (ident(), ident()).prop_map(|(d, s)| TriggerAtom::state(&d, &s)),
        (ident(), cmp, quantity()).prop_map(|(v, c, q)| TriggerAtom::env(&v, c, q)),
        (0u32..MINUTES_PER_DAY).prop_map(|m| TriggerAtom::Time { minutes: m }),
    ]
}

pub fn rule_list() -> impl Strategy<Value = Vec<AutomationRule>> {
    let extra = prop::option::of("[ -~]{0,12}");
    prop::collection::btree_map(
        ident(),
        (
            prop::collection::vec(atom(), 1..4),
            prop::collection::vec((ident(), ident()).prop_map(|(d, a)| RuleAction::new(&d, &a)), 1..3),
            extra,
        ),
        0..5,
    )
    .prop_map(|m| {
        m.into_iter()
            .map(|(id, (trigger, actions, note))| {
                let mut r = AutomationRule::new(id, trigger, actions);
                if let Some(n) = note {
                    r.extra.insert("note".into(), n.into());
                }
                r
            })
            .collect()
    })
}

pub fn device() -> impl Strategy<Value = DeviceSpec> {
    let actions = prop::collection::vec((ident(), ident()), 0..4);
    let extra_states = prop::collection::vec(ident(), 0..3);
    let sensor = prop::option::of((ident(), prop::collection::btree_set(0i64..50, 1..4)));
    (ident(), ident(), ident(), actions, extra_states, sensor).prop_map(|(id, t, loc, actions, states, sensor)| {
        let mut d = DeviceSpec::new(id, t, loc);
        match sensor {
            Some((var, bounds)) => {
                let readings: Vec<(String, Quantity)> =
                    bounds.into_iter().enumerate().map(|(i, b)| (format!("level{i}"), Quantity::from(b))).collect();
                let refs: Vec<(&str, Quantity)> = readings.iter().map(|(s, q)| (s.as_str(), *q)).collect();
                d = d.with_sensor(&var, &refs);
            }
            None => {
                for (a, post) in &actions {
                    d = d.with_action(a, post);
                }
                d = d.with_states(&states.iter().map(String::as_str).collect::<Vec<_>>());
                if d.states.is_empty() {
                    d = d.with_states(&["idle"]);
                }
            }
        }
        d
    })
}

pub fn device_list() -> impl Strategy<Value = Vec<DeviceSpec>> {
    prop::collection::btree_map(ident(), device(), 0..4).prop_map(|m| {
        m.into_iter()
            .map(|(id, mut d)| {
                d.id = id;
                d
            })
            .collect()
    })
}

pub fn canonical_docs() -> Vec<String> {
    homerule::fixtures::ALL.iter().flat_map(|f| [f.devices.to_string(), f.rules.to_string(), f.spec.to_string()]).collect()
}

/// Errors carry a position: a line and column for malformed JSON, an entry
/// name for schema problems, a column inside an expression.
pub fn positioned(e: &ParseError, text: &str) -> bool {
    match e {
        ParseError::Json { line, column, .. } => {
            let lines = text.split('\n').count().max(1);
            *line >= 1 && *line <= lines && *column <= text.len() + 1
        }
        ParseError::DeviceSchema { device, .. } => text.contains(device.as_str()) || device.is_empty(),
        ParseError::RuleSchema { .. } | ParseError::Expression { .. } => true,
        ParseError::NotObject { .. } | ParseError::Spec(_) | ParseError::Overrides(_) => true,
    }
}
