//! Random small homes and a brute-force reference checker.
//!
//! The checker shares only the domain types with the library. It keeps its
//! own state representation, evaluates triggers on real values, explores
//! every interleaving of rule firings and ticks up to the depth bound, and
//! applies the four conflict definitions literally.

#![allow(dead_code)]

pub mod prompts;
pub mod strategies;

use std::collections::{BTreeSet, HashMap};

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use homerule::detect::{detect_all, Completeness, ConflictKind};
use homerule::engine::{build_system, Trace, TransitionKind, TransitionSystem};
use homerule::io::{parse_conflict_spec, parse_device_list, parse_overrides, parse_rule_list, ConflictSpec, StateOverrides, StatePair};
use homerule::model::{AutomationRule, DeviceSpec, HomeState, TriggerAtom, CLOCK, MINUTES_PER_DAY};
use homerule::quantity::Quantity;

/// One generated home, kept as parsed documents.
#[derive(Clone, Debug)]
pub struct Home {
    pub devices: Vec<DeviceSpec>,
    pub rules: Vec<AutomationRule>,
    pub spec: ConflictSpec,
    pub overrides: StateOverrides,
    pub documents: [String; 4],
}

impl Home {
    pub fn system(&self) -> TransitionSystem {
        build_system(&self.devices, &self.rules, &self.spec, &self.overrides).expect("generated homes are valid")
    }
}

struct Kind {
    name: &'static str,
    states: &'static [&'static str],
    actions: &'static [(&'static str, &'static str)],
}

const KINDS: [Kind; 4] = [
    Kind {
        name: "light",
        states: &["off", "on", "low", "high"],
        actions: &[("turn_on", "on"), ("turn_off", "off"), ("dim", "low"), ("brighten", "high")],
    },
    Kind { name: "heater", states: &["off", "on"], actions: &[("turn_on", "on"), ("turn_off", "off")] },
    Kind { name: "ac", states: &["off", "on"], actions: &[("turn_on", "on"), ("turn_off", "off")] },
    Kind { name: "blind", states: &["down", "up"], actions: &[("raise", "up"), ("lower", "down")] },
];

/// `(name, min, max, granularity)`; the second one has a fractional grid.
const VARIABLES: [(&str, i64, i64, (i64, i64)); 2] = [("temperature", 10, 15, (1, 1)), ("illuminance", 0, 3, (1, 2))];

fn q(n: i64, d: i64) -> Quantity {
    Quantity::new(n, d)
}

fn grid_value(rng: &mut ChaCha8Rng, var: (&str, i64, i64, (i64, i64))) -> Quantity {
    let (_, min, max, (gn, gd)) = var;
    let steps = (max - min) * gd / gn;
    Quantity::from(min) + Quantity::from(rng.random_range(0..=steps)) * q(gn, gd)
}

/// A random home with at most 3 devices, 4 rules and 2 variables, depth 10.
pub fn random_home(rng: &mut ChaCha8Rng) -> Home {
    let n_vars = rng.random_range(0..=2);
    let vars: Vec<_> = VARIABLES[..n_vars].to_vec();
    let tick = *[60u32, 120, 180].choose(rng).unwrap();

    let n_devices = rng.random_range(1..=3);
    let mut devices = Map::new();
    let mut actuators: Vec<(String, &Kind)> = Vec::new();
    let mut sensors: Vec<String> = Vec::new();
    for i in 0..n_devices {
        if !vars.is_empty() && i > 0 && rng.random_bool(0.25) {
            let var = *vars.choose(rng).unwrap();
            let id = format!("sensor{i}");
            let threshold = loop {
                let t = grid_value(rng, var);
                if t > Quantity::from(var.1) {
                    break t;
                }
            };
            devices.insert(
                id.clone(),
                json!({"type": "sensor", "action": [], "state": ["low", "high"], "location": "room",
                       "sensor_of": var.0, "readings": {"low": var.1, "high": threshold}}),
            );
            sensors.push(id);
            continue;
        }
        let kind = KINDS.choose(rng).unwrap();
        let id = format!("{}{i}", kind.name);
        let capability: Map<String, Value> = kind.actions.iter().map(|(a, s)| (a.to_string(), json!(s))).collect();
        devices.insert(
            id.clone(),
            json!({"type": kind.name, "action": kind.actions.iter().map(|a| a.0).collect::<Vec<_>>(),
                   "state": kind.states, "location": "room", "capability": capability}),
        );
        actuators.push((id, kind));
    }
    if actuators.is_empty() {
        let kind = &KINDS[1];
        devices.insert(
            "heater9".into(),
            json!({"type": kind.name, "action": ["turn_on", "turn_off"], "state": kind.states, "location": "room"}),
        );
        actuators.push(("heater9".into(), kind));
    }

    let types: BTreeSet<&str> = actuators.iter().map(|(_, k)| k.name).collect();
    let mut effects = Vec::new();
    for var in &vars {
        for kind in KINDS.iter().filter(|k| types.contains(k.name)) {
            for state in kind.states {
                if rng.random_bool(0.5) {
                    let k = *[-2i64, -1, 1, 2].choose(rng).unwrap();
                    let delta = Quantity::from(k) * q(var.3 .0, var.3 .1);
                    effects.push(json!({"device_type": kind.name, "state": state, "variable": var.0, "delta_per_tick": delta}));
                }
            }
        }
    }
    let mut pairs = Vec::new();
    for kind in KINDS.iter().filter(|k| types.contains(k.name)) {
        for (i, a) in kind.states.iter().enumerate() {
            for b in &kind.states[i + 1..] {
                if rng.random_bool(0.4) {
                    pairs.push(json!({"type": kind.name, "states": [a, b]}));
                }
            }
        }
    }
    let mut env_vars = Vec::new();
    for var in &vars {
        let default = grid_value(rng, *var);
        env_vars.push(json!({"name": var.0, "min": var.1, "max": var.2, "granularity": q(var.3 .0, var.3 .1), "default": default}));
    }
    let spec = json!({"state_pairs": pairs, "default_pairs": false, "effects": effects, "env_vars": env_vars,
                      "clock_tick": tick, "depth_bound": 10});

    let mut rules = Map::new();
    for r in 0..rng.random_range(1..=4) {
        let mut atoms: Vec<String> = Vec::new();
        for _ in 0..rng.random_range(1..=3) {
            let atom = match rng.random_range(0..5) {
                0 | 1 => {
                    let (id, kind) = actuators.choose(rng).unwrap();
                    format!("{id} == {}", kind.states.choose(rng).unwrap())
                }
                2 | 3 if !sensors.is_empty() && rng.random_bool(0.4) => {
                    format!("{} == {}", sensors.choose(rng).unwrap(), ["low", "high"].choose(rng).unwrap())
                }
                2 | 3 if !vars.is_empty() => {
                    let var = vars.choose(rng).unwrap();
                    let cmp = ["<", ">", "<=", ">=", "==", "!="].choose(rng).unwrap();
                    format!("{} {cmp} {}", var.0, rng.random_range(var.1..=var.2))
                }
                _ => {
                    let m = (rng.random_range(0..=10) * tick) % MINUTES_PER_DAY;
                    format!("time == {:02}:{:02}", m / 60, m % 60)
                }
            };
            if !atoms.contains(&atom) {
                atoms.push(atom);
            }
        }
        let mut targets: Vec<&(String, &Kind)> = actuators.iter().collect();
        targets.sort_by_key(|_| rng.random::<u32>());
        let n_actions = rng.random_range(1..=targets.len().min(2));
        let actions: Vec<String> = targets[..n_actions]
            .iter()
            .map(|(id, kind)| format!("{id}.{}", kind.actions.choose(rng).unwrap().0))
            .collect();
        rules.insert(format!("r{}", r + 1), json!({"trigger": atoms.join(" && "), "action": actions}));
    }

    let mut overrides = Map::new();
    for (id, kind) in &actuators {
        if rng.random_bool(0.5) {
            overrides.insert(id.clone(), json!(kind.states.choose(rng).unwrap()));
        }
    }
    for var in &vars {
        if rng.random_bool(0.3) {
            overrides.insert(var.0.into(), json!(grid_value(rng, *var)));
        }
    }
    if rng.random_bool(0.3) {
        overrides.insert(CLOCK.into(), json!(rng.random_range(0..4) * tick));
    }

    let documents = [
        serde_json::to_string_pretty(&Value::Object(devices)).unwrap(),
        serde_json::to_string_pretty(&Value::Object(rules)).unwrap(),
        serde_json::to_string_pretty(&spec).unwrap(),
        serde_json::to_string_pretty(&Value::Object(overrides)).unwrap(),
    ];
    let devices = parsed(parse_device_list(&documents[0]), &documents[0]);
    let rules = parsed(parse_rule_list(&documents[1]), &documents[1]);
    let spec = parsed(parse_conflict_spec(&documents[2]), &documents[2]);
    let overrides = parsed(parse_overrides(&documents[3]), &documents[3]);
    Home { devices, rules, spec, overrides, documents }
}

fn parsed<T, E: std::fmt::Display>(r: Result<T, E>, doc: &str) -> T {
    r.unwrap_or_else(|e| panic!("{e}\n{doc}"))
}

pub fn random_homes(seed: u64, count: usize) -> Vec<Home> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_home(&mut rng)).collect()
}

/// A verdict entry stripped to what both sides can state independently.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Entry {
    pub kind: ConflictKind,
    pub rules: Vec<String>,
    pub triggered_rule: Option<String>,
    pub subject: String,
    pub pair: Vec<(String, String)>,
    pub completeness: Completeness,
    /// Length of the shortest path to a state exhibiting the conflict.
    pub witness_depth: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
struct S {
    devices: Vec<String>,
    env: Vec<Quantity>,
    clock: u32,
}

pub struct Oracle<'h> {
    home: &'h Home,
    actuators: Vec<&'h DeviceSpec>,
    /// Rules sorted by id.
    rules: Vec<&'h AutomationRule>,
    reached: HashMap<S, usize>,
    initial: S,
}

enum Goal<'g> {
    Both(&'g [(String, String)]),
    Enabled(&'g AutomationRule),
}

impl<'h> Oracle<'h> {
    pub fn new(home: &'h Home) -> Self {
        let actuators: Vec<&DeviceSpec> = home.devices.iter().filter(|d| d.sensor.is_none()).collect();
        let mut rules: Vec<&AutomationRule> = home.rules.iter().collect();
        rules.sort_by(|a, b| a.id.cmp(&b.id));
        let mut o = Oracle { home, actuators, rules, reached: HashMap::new(), initial: S { devices: vec![], env: vec![], clock: 0 } };
        o.initial = o.initial_state();
        let init = o.initial.clone();
        o.explore(init, 0);
        o
    }

    fn initial_state(&self) -> S {
        let ov = &self.home.overrides;
        let devices = self
            .actuators
            .iter()
            .map(|d| ov.devices.get(&d.id).cloned().unwrap_or_else(|| d.states[0].clone()))
            .collect();
        let env = self
            .home
            .spec
            .env_vars
            .iter()
            .map(|v| ov.env.get(&v.name).copied().unwrap_or_else(|| v.default.expect("generated with defaults")))
            .collect();
        let tick = self.home.spec.clock_tick as i64;
        let clock = ov.env.get(CLOCK).map_or(0, |m| (m.floor() / tick * tick) as u32);
        S { devices, env, clock }
    }

    /// Depth-first over every interleaving, revisiting a state only when it
    /// is reached by a shorter path than before.
    fn explore(&mut self, s: S, depth: usize) {
        if self.reached.get(&s).is_some_and(|&d| d <= depth) {
            return;
        }
        self.reached.insert(s.clone(), depth);
        if depth == self.home.spec.depth_bound {
            return;
        }
        let rules = self.rules.clone();
        for r in rules {
            if let Some(next) = self.fire(r, &s) {
                self.explore(next, depth + 1);
            }
        }
        let next = self.tick(&s);
        self.explore(next, depth + 1);
    }

    fn device_state<'s>(&self, s: &'s S, id: &str) -> Option<&'s str> {
        self.actuators.iter().position(|d| d.id == id).map(|i| s.devices[i].as_str())
    }

    fn value(&self, s: &S, var: &str) -> Quantity {
        if var == CLOCK {
            return Quantity::from(s.clock as i64);
        }
        let j = self.home.spec.env_vars.iter().position(|v| v.name == var).expect("declared");
        s.env[j]
    }

    fn holds(&self, atom: &TriggerAtom, s: &S) -> bool {
        match atom {
            TriggerAtom::State { device, state } => match self.device_state(s, device) {
                Some(current) => current == state,
                None => {
                    let d = self.home.devices.iter().find(|d| &d.id == device).unwrap();
                    let sensor = d.sensor.as_ref().unwrap();
                    sensor.reading(self.value(s, &sensor.variable)) == Some(state.as_str())
                }
            },
            TriggerAtom::Env { variable, cmp, value } => cmp.holds(self.value(s, variable), *value),
            TriggerAtom::Time { minutes } => *minutes <= s.clock && s.clock < minutes + self.home.spec.clock_tick,
        }
    }

    fn post(&self, rule: &AutomationRule) -> Vec<(String, String)> {
        rule.actions
            .iter()
            .map(|a| {
                let d = self.home.devices.iter().find(|d| d.id == a.device).unwrap();
                (a.device.clone(), d.capability[&a.action].clone())
            })
            .collect()
    }

    fn fire(&self, rule: &AutomationRule, s: &S) -> Option<S> {
        if !rule.trigger.iter().all(|a| self.holds(a, s)) {
            return None;
        }
        let mut next = s.clone();
        for (device, state) in self.post(rule) {
            let i = self.actuators.iter().position(|d| d.id == device).unwrap();
            next.devices[i] = state;
        }
        (next != *s).then_some(next)
    }

    fn tick(&self, s: &S) -> S {
        let spec = &self.home.spec;
        let mut next = s.clone();
        for (j, v) in spec.env_vars.iter().enumerate() {
            let mut total = Quantity::ZERO;
            for (d, state) in self.actuators.iter().zip(&s.devices) {
                for e in &spec.effects {
                    if e.device_type == d.device_type && &e.state == state && e.variable == v.name {
                        total = total + e.delta_per_tick;
                    }
                }
            }
            let raw = s.env[j] + total;
            next.env[j] = if raw < v.min { v.min } else if raw > v.max { v.max } else { raw };
        }
        next.clock = (s.clock + spec.clock_tick) % MINUTES_PER_DAY;
        next
    }

    fn satisfies(&self, goal: &Goal<'_>, s: &S) -> bool {
        match goal {
            Goal::Both(states) => states.iter().all(|(d, st)| self.device_state(s, d) == Some(st.as_str())),
            Goal::Enabled(rule) => self.fire(rule, s).is_some(),
        }
    }

    fn shortest(&self, goal: &Goal<'_>) -> Option<usize> {
        self.reached.iter().filter(|(s, _)| self.satisfies(goal, s)).map(|(_, &d)| d).min()
    }

    fn device_type(&self, id: &str) -> &str {
        &self.home.devices.iter().find(|d| d.id == id).unwrap().device_type
    }

    fn signs(&self, device_type: &str, state: &str, var: &str) -> Vec<i64> {
        self.home
            .spec
            .effects
            .iter()
            .filter(|e| e.device_type == device_type && e.state == state && e.variable == var)
            .map(|e| e.delta_per_tick.signum())
            .collect()
    }

    fn actuator_atoms(&self, rule: &AutomationRule) -> Vec<(String, String)> {
        rule.trigger
            .iter()
            .filter_map(|a| match a {
                TriggerAtom::State { device, state } if self.device_state(&self.initial, device).is_some() => {
                    Some((device.clone(), state.clone()))
                }
                _ => None,
            })
            .collect()
    }

    fn read_variables(&self, rule: &AutomationRule) -> Vec<String> {
        let mut out = Vec::new();
        for a in &rule.trigger {
            let v = match a {
                TriggerAtom::State { device, .. } => {
                    match &self.home.devices.iter().find(|d| &d.id == device).unwrap().sensor {
                        Some(s) => s.variable.clone(),
                        None => continue,
                    }
                }
                TriggerAtom::Env { variable, .. } => variable.clone(),
                TriggerAtom::Time { .. } => CLOCK.to_string(),
            };
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Whether every atom is produced by some rule other than `target`.
    fn produced_by_others(&self, target: &AutomationRule, atoms: &[(String, String)]) -> bool {
        atoms.iter().all(|atom| self.rules.iter().any(|r| r.id != target.id && self.post(r).contains(atom)))
    }

    fn contributors(&self, target: &AutomationRule, atoms: &[(String, String)]) -> Vec<String> {
        let read = self.read_variables(target);
        let mut out = BTreeSet::from([target.id.clone()]);
        for r in &self.rules {
            if r.id == target.id {
                continue;
            }
            let post = self.post(r);
            let covers = post.iter().any(|p| atoms.contains(p));
            let influences = post.iter().any(|(d, s)| {
                self.home.spec.effects.iter().any(|e| {
                    e.device_type == self.device_type(d) && &e.state == s && read.contains(&e.variable)
                })
            });
            if covers || influences {
                out.insert(r.id.clone());
            }
        }
        out.into_iter().collect()
    }

    fn subject(&self, rule: &AutomationRule, atoms: &[(String, String)]) -> String {
        match atoms.first() {
            Some((d, _)) => d.clone(),
            None => self.read_variables(rule).into_iter().next().unwrap_or_else(|| CLOCK.to_string()),
        }
    }

    pub fn verdict(&self) -> Vec<Entry> {
        let mut out = Vec::new();
        let spec = &self.home.spec;
        for (x, a) in self.rules.iter().enumerate() {
            for b in &self.rules[x + 1..] {
                for (d, s) in self.post(a) {
                    for (d2, s2) in self.post(b) {
                        let pair = vec![(d.clone(), s.clone()), (d2.clone(), s2.clone())];
                        let rules = vec![a.id.clone(), b.id.clone()];
                        let (ta, tb) = (self.device_type(&d), self.device_type(&d2));
                        if d == d2 && s != s2 && spec.state_pairs.contains(&StatePair::new(ta, &s, &s2)) {
                            out.push(Entry {
                                kind: ConflictKind::StateConflict,
                                rules: rules.clone(),
                                triggered_rule: None,
                                subject: d.clone(),
                                pair: pair.clone(),
                                completeness: Completeness::Exact,
                                witness_depth: None,
                            });
                        }
                        for v in &spec.env_vars {
                            let opposite = self
                                .signs(ta, &s, &v.name)
                                .iter()
                                .any(|x| self.signs(tb, &s2, &v.name).iter().any(|y| x * y < 0));
                            if opposite {
                                out.push(Entry {
                                    kind: ConflictKind::EnvironmentConflict,
                                    rules: rules.clone(),
                                    triggered_rule: None,
                                    subject: v.name.clone(),
                                    pair: pair.clone(),
                                    completeness: Completeness::Exact,
                                    witness_depth: if d == d2 { None } else { self.shortest(&Goal::Both(&pair)) },
                                });
                            }
                        }
                    }
                }
            }
        }
        for r in &self.rules {
            let atoms = self.actuator_atoms(r);
            if !atoms.is_empty() && self.produced_by_others(r, &atoms) {
                out.push(Entry {
                    kind: ConflictKind::StateCascading,
                    rules: self.contributors(r, &atoms),
                    triggered_rule: Some(r.id.clone()),
                    subject: self.subject(r, &atoms),
                    pair: atoms.clone(),
                    completeness: Completeness::Exact,
                    witness_depth: self.shortest(&Goal::Both(&atoms)),
                });
            }
            let goal = Goal::Enabled(r);
            if self.satisfies(&goal, &self.initial) || !self.produced_by_others(r, &atoms) {
                continue;
            }
            // Ticks alone, until the states repeat.
            let mut seen = BTreeSet::new();
            let mut s = self.initial.clone();
            let mut by_ticks = false;
            while seen.insert(s.clone()) {
                by_ticks |= self.satisfies(&goal, &s);
                s = self.tick(&s);
            }
            if by_ticks {
                continue;
            }
            if let Some(depth) = self.shortest(&goal) {
                out.push(Entry {
                    kind: ConflictKind::StateEnvCascading,
                    rules: self.contributors(r, &atoms),
                    triggered_rule: Some(r.id.clone()),
                    subject: self.subject(r, &atoms),
                    pair: atoms,
                    completeness: Completeness::Bounded,
                    witness_depth: Some(depth),
                });
            }
        }
        out.sort();
        out.dedup_by(|a, b| (&a.kind, &a.rules, &a.triggered_rule, &a.subject, &a.pair) == (&b.kind, &b.rules, &b.triggered_rule, &b.subject, &b.pair));
        out
    }

    fn home_state(&self, s: &S) -> HomeState {
        let mut h = HomeState::default();
        for (d, st) in self.actuators.iter().zip(&s.devices) {
            h.device_states.insert(d.id.clone(), st.clone());
        }
        for (v, x) in self.home.spec.env_vars.iter().zip(&s.env) {
            h.env_values.insert(v.name.clone(), *x);
        }
        h.env_values.insert(CLOCK.into(), Quantity::from(s.clock as i64));
        h
    }

    /// Every state reachable within the bound.
    pub fn reachable(&self) -> BTreeSet<HomeState> {
        self.reached.keys().map(|s| self.home_state(s)).collect()
    }

    /// Checks a trace step by step against this checker's own semantics.
    pub fn replays(&self, trace: &Trace) -> Result<(), String> {
        if trace.initial != self.home_state(&self.initial) {
            return Err("initial state differs".into());
        }
        let mut s = self.initial.clone();
        for (i, step) in trace.steps.iter().enumerate() {
            s = match &step.transition {
                TransitionKind::EnvTick => self.tick(&s),
                TransitionKind::RuleFire(id) => {
                    let r = self.rules.iter().find(|r| &r.id == id).ok_or(format!("step {i}: unknown rule"))?;
                    self.fire(r, &s).ok_or(format!("step {i}: {id} is not enabled"))?
                }
            };
            if step.state != self.home_state(&s) {
                return Err(format!("step {i}: state differs"));
            }
        }
        Ok(())
    }
}

/// The library's verdict in the checker's terms. Witnesses that do not
/// replay under the checker's semantics are reported as errors.
pub fn library_verdict(home: &Home, oracle: &Oracle<'_>) -> Result<Vec<Entry>, String> {
    let mut out = Vec::new();
    for r in detect_all(&home.system()) {
        if let Some(w) = &r.witness {
            oracle.replays(w).map_err(|e| format!("{:?} {:?}: {e}", r.kind, r.rules))?;
        }
        out.push(Entry {
            kind: r.kind,
            rules: r.rules,
            triggered_rule: r.triggered_rule,
            subject: r.device_or_variable,
            pair: r.pair.into_iter().map(|p| (p.device, p.state)).collect(),
            completeness: r.completeness,
            witness_depth: r.witness.map(|w| w.depth()),
        });
    }
    out.sort();
    Ok(out)
}

/// Homes whose verdicts disagree, with both sides.
pub fn mismatches(homes: &[Home]) -> Vec<(usize, String)> {
    let mut out = Vec::new();
    for (i, home) in homes.iter().enumerate() {
        let oracle = Oracle::new(home);
        let engine: BTreeSet<HomeState> = home.system().reachable_states().into_iter().collect();
        if engine != oracle.reachable() {
            out.push((i, format!("reachable states differ\n{}", home.documents.join("\n"))));
            continue;
        }
        let expected = oracle.verdict();
        match library_verdict(home, &oracle) {
            Ok(got) if got == expected => {}
            Ok(got) => out.push((i, format!("expected {expected:#?}\ngot {got:#?}\n{}", home.documents.join("\n")))),
            Err(e) => out.push((i, format!("{e}\n{}", home.documents.join("\n")))),
        }
    }
    out
}
