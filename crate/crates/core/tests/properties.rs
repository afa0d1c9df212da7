mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::strategies::{canonical_docs, device_list, positioned, rule_list};

use homerule::detect::{detect_all, ConflictKind, ConflictReport};
use homerule::engine::{build_system, TransitionSystem};
use homerule::io::{
    parse_conflict_spec, parse_device_list, parse_overrides, parse_rule_list, parse_trigger, serialize_device_list,
    serialize_rule_list, StatePair,
};
use homerule::model::{HomeState, CLOCK, MINUTES_PER_DAY};
use homerule::quantity::Quantity;

fn home(seed: u64) -> support::Home {
    support::random_home(&mut ChaCha8Rng::seed_from_u64(seed))
}

fn is_enabled(sys: &TransitionSystem, rule: &str, state: &HomeState) -> bool {
    sys.enabled_rules(state).unwrap().iter().any(|r| r == rule)
}

/// The final state of a witness shows what its report claims.
fn witness_shows_conflict(sys: &TransitionSystem, r: &ConflictReport) -> bool {
    let Some(w) = &r.witness else { return true };
    let last = w.final_state();
    match r.kind {
        ConflictKind::StateConflict => false,
        ConflictKind::EnvironmentConflict | ConflictKind::StateCascading => r.pair.iter().all(|p| p.holds_in(last)),
        ConflictKind::StateEnvCascading => is_enabled(sys, r.triggered_rule.as_deref().unwrap(), last),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn rule_firing_only_moves_its_targets(seed in any::<u64>()) {
        let h = home(seed);
        let sys = h.system();
        for s in sys.reachable_states().into_iter().take(40) {
            for id in sys.enabled_rules(&s).unwrap() {
                let next = sys.apply_rule(&s, &id).unwrap();
                prop_assert_eq!(&next.env_values, &s.env_values);
                let targets: BTreeSet<&str> = sys.rule(&id).unwrap().action_devices().collect();
                for (d, st) in &s.device_states {
                    if !targets.contains(d.as_str()) {
                        prop_assert_eq!(&next.device_states[d], st);
                    }
                }
                prop_assert_ne!(&next, &s);
            }
        }
    }

    #[test]
    fn ticks_keep_devices_and_bounds(seed in any::<u64>()) {
        let h = home(seed);
        let sys = h.system();
        for s in sys.reachable_states().into_iter().take(40) {
            let next = sys.env_tick(&s).unwrap();
            prop_assert_eq!(&next.device_states, &s.device_states);
            let tick = Quantity::from(sys.spec().clock_tick as i64);
            let day = Quantity::from(MINUTES_PER_DAY as i64);
            let expected = s.env_values[CLOCK] + tick;
            let expected = if expected >= day { expected - day } else { expected };
            prop_assert_eq!(next.env_values[CLOCK], expected);
            for v in &sys.spec().env_vars {
                prop_assert!(v.contains(next.env_values[&v.name]));
            }
        }
    }

    #[test]
    fn detection_is_deterministic_and_order_free(seed in any::<u64>()) {
        let h = home(seed);
        let first = detect_all(&h.system());
        prop_assert_eq!(&first, &detect_all(&h.system()));
        let mut reversed = h.rules.clone();
        reversed.reverse();
        let sys = build_system(&h.devices, &reversed, &h.spec, &h.overrides).unwrap();
        prop_assert_eq!(&first, &detect_all(&sys));
    }

    #[test]
    fn witnesses_replay_to_their_conflict(seed in any::<u64>()) {
        let h = home(seed);
        let sys = h.system();
        for r in detect_all(&sys) {
            if let Some(w) = &r.witness {
                prop_assert_eq!(&w.initial, sys.initial());
                prop_assert_eq!(&sys.replay(w).unwrap(), w.final_state());
                prop_assert!(w.depth() <= sys.depth_bound());
            }
            prop_assert!(witness_shows_conflict(&sys, &r), "{:?}", r);
            let min_rules = match r.kind {
                ConflictKind::StateConflict | ConflictKind::EnvironmentConflict => 2,
                _ => 1,
            };
            prop_assert!(r.rules.len() >= min_rules);
        }
    }

    #[test]
    fn more_state_pairs_never_hide_state_conflicts(seed in any::<u64>()) {
        let h = home(seed);
        let state_conflicts = |spec| {
            let sys = build_system(&h.devices, &h.rules, spec, &h.overrides).unwrap();
            detect_all(&sys).into_iter().filter(|r| r.kind == ConflictKind::StateConflict).map(|r| r.key()).collect::<BTreeSet<_>>()
        };
        let before = state_conflicts(&h.spec);
        let mut wider = h.spec.clone();
        for d in h.devices.iter().filter(|d| !d.is_sensor()) {
            for a in &d.states {
                for b in &d.states {
                    if a != b {
                        wider.state_pairs.insert(StatePair::new(&d.device_type, a, b));
                    }
                }
            }
        }
        prop_assert!(before.is_subset(&state_conflicts(&wider)));
    }

    #[test]
    fn deeper_search_never_loses_cascades(seed in any::<u64>()) {
        let h = home(seed);
        let cascades = |depth| {
            let mut spec = h.spec.clone();
            spec.depth_bound = depth;
            let sys = build_system(&h.devices, &h.rules, &spec, &h.overrides).unwrap();
            detect_all(&sys).into_iter().filter(|r| r.kind == ConflictKind::StateEnvCascading).map(|r| r.key()).collect::<BTreeSet<_>>()
        };
        prop_assert!(cascades(4).is_subset(&cascades(10)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn rule_lists_round_trip(rules in rule_list()) {
        let text = serialize_rule_list(&rules);
        let back = parse_rule_list(&text).unwrap();
        prop_assert_eq!(&back, &rules);
        prop_assert_eq!(serialize_rule_list(&back), text);
    }

    #[test]
    fn device_lists_round_trip(devices in device_list()) {
        let text = serialize_device_list(&devices);
        let back = parse_device_list(&text).unwrap();
        prop_assert_eq!(&back, &devices);
        prop_assert_eq!(serialize_device_list(&back), text);
    }

    #[test]
    fn arbitrary_bytes_give_positioned_errors(bytes in prop::collection::vec(any::<u8>(), 0..200)) {
        let text = String::from_utf8_lossy(&bytes);
        for result in [
            parse_rule_list(&text).map(|_| ()),
            parse_device_list(&text).map(|_| ()),
            parse_conflict_spec(&text).map(|_| ()),
            parse_overrides(&text).map(|_| ()),
        ] {
            if let Err(e) = result {
                prop_assert!(positioned(&e, &text), "{e:?}");
            }
        }
        if let Err(e) = parse_trigger(&text) {
            prop_assert!(e.column >= 1 && e.column <= text.chars().count() + 1, "{e:?} in {text:?}");
        }
    }

    #[test]
    fn damaged_documents_give_positioned_errors(doc in prop::sample::select(canonical_docs()), at in any::<prop::sample::Index>(), byte in any::<u8>(), delete in any::<bool>()) {
        let mut bytes = doc.into_bytes();
        let i = at.index(bytes.len());
        if delete {
            bytes.remove(i);
        } else {
            bytes.insert(i, byte);
        }
        let text = String::from_utf8_lossy(&bytes);
        for result in [
            parse_rule_list(&text).map(|_| ()),
            parse_device_list(&text).map(|_| ()),
            parse_conflict_spec(&text).map(|_| ()),
        ] {
            if let Err(e) = result {
                prop_assert!(positioned(&e, &text), "{e:?}");
            }
        }
    }
}
