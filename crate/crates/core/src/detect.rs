//! The four conflict classes: static definitional checks over rule results,
//! plus breadth-first confirmation that attaches witness traces.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::engine::{all_hold, PackedGoal, SearchMode, Trace, TransitionSystem};
use crate::io::ConflictSpec;
use crate::model::{
    eval_trigger, rule_result_list, AutomationRule, HomeState, ResolutionError, Scope, TriggerAtom, CLOCK,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ConflictKind {
    StateConflict,
    EnvironmentConflict,
    StateCascading,
    StateEnvCascading,
}

impl ConflictKind {
    pub const ALL: [ConflictKind; 4] = [
        ConflictKind::StateConflict,
        ConflictKind::EnvironmentConflict,
        ConflictKind::StateCascading,
        ConflictKind::StateEnvCascading,
    ];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completeness {
    Exact,
    Bounded,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DeviceState {
    pub device: String,
    pub state: String,
}

impl DeviceState {
    pub fn new(device: &str, state: &str) -> Self {
        DeviceState { device: device.into(), state: state.into() }
    }

    pub fn holds_in(&self, state: &HomeState) -> bool {
        state.device_states.get(&self.device) == Some(&self.state)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictReport {
    pub kind: ConflictKind,
    /// Implicated rule ids, sorted.
    pub rules: Vec<String>,
    /// For cascading kinds, the rule that gets enabled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub triggered_rule: Option<String>,
    pub device_or_variable: String,
    /// The two conflicting device states, or for cascading kinds the covered
    /// trigger states of the triggered rule.
    pub pair: Vec<DeviceState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub witness: Option<Trace>,
    pub completeness: Completeness,
}

impl ConflictReport {
    /// Identity used for deduplication and verdict comparison.
    pub fn key(&self) -> (ConflictKind, Vec<String>, Option<String>, String, Vec<DeviceState>) {
        (
            self.kind,
            self.rules.clone(),
            self.triggered_rule.clone(),
            self.device_or_variable.clone(),
            self.pair.clone(),
        )
    }
}

/// One unordered pair of `(device type, state)` with opposite-sign effects on
/// `variable`; `first <= second`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EnvPair {
    pub first: (String, String),
    pub second: (String, String),
    pub variable: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct EnvConflictPairs {
    pub pairs: BTreeSet<EnvPair>,
}

impl EnvConflictPairs {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// Variables on which `(ta, sa)` and `(tb, sb)` push in opposite directions.
    pub fn variables(&self, ta: &str, sa: &str, tb: &str, sb: &str) -> Vec<&str> {
        let a = (ta.to_string(), sa.to_string());
        let b = (tb.to_string(), sb.to_string());
        let (first, second) = if a <= b { (a, b) } else { (b, a) };
        self.pairs
            .iter()
            .filter(|p| p.first == first && p.second == second)
            .map(|p| p.variable.as_str())
            .collect()
    }

    pub fn contains(&self, ta: &str, sa: &str, tb: &str, sb: &str) -> bool {
        !self.variables(ta, sa, tb, sb).is_empty()
    }
}

/// All `(type, state)` pairs whose effects on a shared variable have strictly
/// opposite signs.
pub fn derive_env_pairs(spec: &ConflictSpec) -> EnvConflictPairs {
    let mut pairs = BTreeSet::new();
    for (i, a) in spec.effects.iter().enumerate() {
        for b in &spec.effects[i + 1..] {
            if a.variable == b.variable && a.delta_per_tick.signum() * b.delta_per_tick.signum() < 0 {
                let x = (a.device_type.clone(), a.state.clone());
                let y = (b.device_type.clone(), b.state.clone());
                let (first, second) = if x <= y { (x, y) } else { (y, x) };
                pairs.insert(EnvPair { first, second, variable: a.variable.clone() });
            }
        }
    }
    EnvConflictPairs { pairs }
}

/// True iff both members of some concrete `(device, state)` pair hold.
pub fn is_in(state: &HomeState, pairs: &[(DeviceState, DeviceState)]) -> bool {
    pairs.iter().any(|(a, b)| a.holds_in(state) && b.holds_in(state))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExistVariant {
    /// Actuator state atoms only.
    StatesOnly,
    /// The whole trigger, including environment, time and sensor atoms.
    WithEnvironment,
}

/// Whether the trigger states of `rule` are present in `state`.
pub fn is_exist(
    state: &HomeState,
    rule: &AutomationRule,
    scope: &Scope<'_>,
    variant: ExistVariant,
) -> Result<bool, ResolutionError> {
    let atoms: Vec<TriggerAtom> = match variant {
        ExistVariant::WithEnvironment => rule.trigger.clone(),
        ExistVariant::StatesOnly => rule.trigger.iter().filter(|a| scope.is_actuator_atom(a)).cloned().collect(),
    };
    eval_trigger(&atoms, state, scope)
}

struct Candidate<'s> {
    report: ConflictReport,
    goal: Option<PackedGoal<'s>>,
    /// Drop the report when the goal is not reached within the bound.
    required: bool,
}

struct Facts<'s> {
    sys: &'s TransitionSystem,
    scope: Scope<'s>,
    /// Rule indices in id order, with their result states.
    results: Vec<(usize, Vec<(String, String)>)>,
}

impl<'s> Facts<'s> {
    fn new(sys: &'s TransitionSystem) -> Self {
        let scope = Scope::new(sys.devices(), sys.spec().clock_tick);
        let mut results: Vec<(usize, Vec<(String, String)>)> = sys
            .rules()
            .iter()
            .enumerate()
            .map(|(i, r)| (i, rule_result_list(r, sys.devices()).expect("validated rules resolve")))
            .collect();
        results.sort_by(|a, b| sys.rules()[a.0].id.cmp(&sys.rules()[b.0].id));
        Facts { sys, scope, results }
    }

    fn id(&self, rule: usize) -> &'s str {
        &self.sys.rules()[rule].id
    }

    fn device_type(&self, device: &str) -> &'s str {
        &self.scope.device(device).expect("validated device").device_type
    }

    fn state_goal(&self, atoms: &[DeviceState]) -> PackedGoal<'s> {
        let conds = self.sys.compile_atoms(
            &atoms.iter().map(|a| TriggerAtom::state(&a.device, &a.state)).collect::<Vec<_>>(),
        );
        Box::new(move |s: &[u32]| all_hold(&conds, s))
    }

    /// Variables a trigger reads: environment atoms, sensor atoms and the clock.
    fn read_variables(&self, trigger: &[TriggerAtom]) -> Vec<String> {
        let mut out: Vec<String> = Vec::new();
        for atom in trigger {
            let var = match atom {
                TriggerAtom::State { device, .. } => match &self.scope.device(device).and_then(|d| d.sensor.as_ref()) {
                    Some(sensor) => sensor.variable.clone(),
                    None => continue,
                },
                TriggerAtom::Env { variable, .. } => variable.clone(),
                TriggerAtom::Time { .. } => CLOCK.to_string(),
            };
            if !out.contains(&var) {
                out.push(var);
            }
        }
        out
    }

    /// Rules other than `target` that cover one of `atoms` or whose results
    /// carry an effect on a variable `target`'s trigger reads.
    fn contributors(&self, target: usize, atoms: &[DeviceState]) -> BTreeSet<String> {
        let trigger = &self.sys.rules()[target].trigger;
        let read = self.read_variables(trigger);
        let mut out = BTreeSet::from([self.id(target).to_string()]);
        for (j, results) in &self.results {
            if *j == target {
                continue;
            }
            let covers = results.iter().any(|(d, s)| atoms.iter().any(|a| &a.device == d && &a.state == s));
            let influences = results.iter().any(|(d, s)| {
                self.sys.spec().effects_of(self.device_type(d), s).any(|e| read.contains(&e.variable))
            });
            if covers || influences {
                out.insert(self.id(*j).to_string());
            }
        }
        out
    }

    fn covered(&self, target: usize, atoms: &[DeviceState]) -> bool {
        atoms.iter().all(|a| {
            self.results
                .iter()
                .any(|(j, res)| *j != target && res.iter().any(|(d, s)| d == &a.device && s == &a.state))
        })
    }

    fn actuator_atoms(&self, rule: usize) -> Vec<DeviceState> {
        self.scope
            .actuator_atoms(&self.sys.rules()[rule].trigger)
            .into_iter()
            .map(|(d, s)| DeviceState::new(d, s))
            .collect()
    }

    fn subject(&self, rule: usize, atoms: &[DeviceState]) -> String {
        match atoms.first() {
            Some(a) => a.device.clone(),
            None => self.read_variables(&self.sys.rules()[rule].trigger).into_iter().next().unwrap_or(CLOCK.into()),
        }
    }
}

fn state_conflict_candidates<'s>(f: &Facts<'s>) -> Vec<Candidate<'s>> {
    let mut out = Vec::new();
    for (x, (i, ri)) in f.results.iter().enumerate() {
        for (j, rj) in &f.results[x + 1..] {
            for (d, s) in ri {
                for (d2, s2) in rj {
                    if d == d2 && f.sys.spec().is_state_pair(f.device_type(d), s, s2) {
                        out.push(Candidate {
                            report: ConflictReport {
                                kind: ConflictKind::StateConflict,
                                rules: vec![f.id(*i).into(), f.id(*j).into()],
                                triggered_rule: None,
                                device_or_variable: d.clone(),
                                pair: vec![DeviceState::new(d, s), DeviceState::new(d2, s2)],
                                witness: None,
                                completeness: Completeness::Exact,
                            },
                            goal: None,
                            required: false,
                        });
                    }
                }
            }
        }
    }
    out
}

fn environment_conflict_candidates<'s>(f: &Facts<'s>) -> Vec<Candidate<'s>> {
    let env_pairs = derive_env_pairs(f.sys.spec());
    let mut out = Vec::new();
    if env_pairs.is_empty() {
        return out;
    }
    for (x, (i, ri)) in f.results.iter().enumerate() {
        for (j, rj) in &f.results[x + 1..] {
            for (d, s) in ri {
                for (d2, s2) in rj {
                    for var in env_pairs.variables(f.device_type(d), s, f.device_type(d2), s2) {
                        let pair = vec![DeviceState::new(d, s), DeviceState::new(d2, s2)];
                        let goal = (d != d2).then(|| f.state_goal(&pair));
                        out.push(Candidate {
                            report: ConflictReport {
                                kind: ConflictKind::EnvironmentConflict,
                                rules: vec![f.id(*i).into(), f.id(*j).into()],
                                triggered_rule: None,
                                device_or_variable: var.to_string(),
                                pair,
                                witness: None,
                                completeness: Completeness::Exact,
                            },
                            goal,
                            required: false,
                        });
                    }
                }
            }
        }
    }
    out
}

fn state_cascading_candidates<'s>(f: &Facts<'s>) -> Vec<Candidate<'s>> {
    let mut out = Vec::new();
    for (i, _) in &f.results {
        let atoms = f.actuator_atoms(*i);
        if atoms.is_empty() || !f.covered(*i, &atoms) {
            continue;
        }
        out.push(Candidate {
            report: ConflictReport {
                kind: ConflictKind::StateCascading,
                rules: f.contributors(*i, &atoms).into_iter().collect(),
                triggered_rule: Some(f.id(*i).into()),
                device_or_variable: f.subject(*i, &atoms),
                pair: atoms.clone(),
                witness: None,
                completeness: Completeness::Exact,
            },
            goal: Some(f.state_goal(&atoms)),
            required: false,
        });
    }
    out
}

fn state_env_cascading_candidates<'s>(f: &Facts<'s>) -> Vec<Candidate<'s>> {
    let sys = f.sys;
    let init = sys.initial_packed();
    let orbit = sys.tick_orbit();
    let mut out = Vec::new();
    for &(i, _) in &f.results {
        if sys.is_enabled_packed(i, init) {
            continue;
        }
        let atoms = f.actuator_atoms(i);
        if !f.covered(i, &atoms) {
            continue;
        }
        // The environment alone enabling the rule is ordinary scheduling.
        if orbit.iter().any(|s| sys.is_enabled_packed(i, s)) {
            continue;
        }
        out.push(Candidate {
            report: ConflictReport {
                kind: ConflictKind::StateEnvCascading,
                rules: f.contributors(i, &atoms).into_iter().collect(),
                triggered_rule: Some(f.id(i).into()),
                device_or_variable: f.subject(i, &atoms),
                pair: atoms,
                witness: None,
                completeness: Completeness::Bounded,
            },
            goal: Some(Box::new(move |s: &[u32]| sys.is_enabled_packed(i, s))),
            required: true,
        });
    }
    out
}

/// Runs one search for every candidate goal and attaches the witnesses.
fn resolve(sys: &TransitionSystem, candidates: Vec<Candidate<'_>>) -> Vec<ConflictReport> {
    let mut goals = Vec::new();
    let mut slots = Vec::new();
    let mut pending = Vec::new();
    for c in candidates {
        slots.push(c.goal.is_some().then_some(goals.len()));
        if let Some(g) = c.goal {
            goals.push(g);
        }
        pending.push((c.report, c.required));
    }
    let found = if goals.is_empty() {
        Vec::new()
    } else {
        sys.search_packed(&goals, SearchMode::AnyState, sys.depth_bound()).found
    };
    pending
        .into_iter()
        .zip(slots)
        .filter_map(|((mut report, required), slot)| {
            report.witness = slot.and_then(|g| found[g].clone());
            (!required || report.witness.is_some()).then_some(report)
        })
        .collect()
}

fn canonical(mut reports: Vec<ConflictReport>) -> Vec<ConflictReport> {
    reports.sort_by_key(|r| r.key());
    reports.dedup_by(|a, b| a.key() == b.key());
    reports
}

/// Rule pairs driving one device into a conflicting pair of states.
pub fn detect_state_conflicts(sys: &TransitionSystem) -> Vec<ConflictReport> {
    let f = Facts::new(sys);
    canonical(resolve(sys, state_conflict_candidates(&f)))
}

/// Rule pairs whose result states push one variable in opposite directions.
/// A witness is attached when both states can hold at once within the bound.
pub fn detect_environment_conflicts(sys: &TransitionSystem) -> Vec<ConflictReport> {
    let f = Facts::new(sys);
    canonical(resolve(sys, environment_conflict_candidates(&f)))
}

/// Rules whose actuator trigger states are all produced by other rules.
pub fn detect_state_cascading(sys: &TransitionSystem) -> Vec<ConflictReport> {
    let f = Facts::new(sys);
    canonical(resolve(sys, state_cascading_candidates(&f)))
}

/// Rules not enabled initially that other rules plus environment dynamics
/// enable within the bound, excluding rules the environment alone enables.
pub fn detect_state_env_cascading(sys: &TransitionSystem) -> Vec<ConflictReport> {
    let f = Facts::new(sys);
    canonical(resolve(sys, state_env_cascading_candidates(&f)))
}

/// All four classes from one shared search, deduplicated and ordered by kind
/// then rule ids.
pub fn detect_all(sys: &TransitionSystem) -> Vec<ConflictReport> {
    let f = Facts::new(sys);
    let mut candidates = state_conflict_candidates(&f);
    candidates.extend(environment_conflict_candidates(&f));
    candidates.extend(state_cascading_candidates(&f));
    candidates.extend(state_env_cascading_candidates(&f));
    canonical(resolve(sys, candidates))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NoConflict,
    Conflicts,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReportDocument {
    pub verdict: Verdict,
    pub depth_bound: usize,
    pub conflicts: Vec<ConflictReport>,
}

impl ReportDocument {
    pub fn new(conflicts: Vec<ConflictReport>, depth_bound: usize) -> Self {
        let verdict = if conflicts.is_empty() { Verdict::NoConflict } else { Verdict::Conflicts };
        ReportDocument { verdict, depth_bound, conflicts }
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("reports serialize");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

/// Count of reports per kind, in kind order.
pub fn kind_counts(reports: &[ConflictReport]) -> BTreeMap<ConflictKind, usize> {
    let mut out = BTreeMap::new();
    for r in reports {
        *out.entry(r.kind).or_insert(0) += 1;
    }
    out
}
