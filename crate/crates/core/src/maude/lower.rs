//! Lowering call programs to a Maude module.
//!
//! Home states are `{Soup}` terms over an associative-commutative soup of
//! `device(id, type, state, location)` and `env(name, k)` items, where `k` is
//! the grid step of the variable (the clock counts ticks). Rule results,
//! trigger states and rule ids are kept as constant soups so the
//! definition-level conflict classes can be searched for without rewriting.

use std::collections::BTreeSet;

use crate::detect::{derive_env_pairs, ConflictKind};
use crate::engine::TransitionSystem;
use crate::io::ConflictSpec;
use crate::model::{Comparator, TriggerAtom, MINUTES_PER_DAY};
use crate::quantity::Quantity;

use super::program::{canonical_program, ProgramError};
use super::script::{AdapterProgram, ModelDevice, ModelTransition};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OpDecl {
    pub name: String,
    pub arity: Vec<String>,
    pub coarity: String,
    pub attrs: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Equation {
    pub lhs: String,
    pub rhs: String,
    pub condition: Option<String>,
    pub owise: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EquationBlock {
    pub title: String,
    pub equations: Vec<Equation>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RewriteRule {
    pub label: String,
    pub lhs: String,
    pub rhs: String,
    /// Present for conditional rules.
    pub condition: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SearchCommand {
    pub kind: ConflictKind,
    /// Maximum rewrite depth; `None` searches without a bound.
    pub depth: Option<usize>,
    pub start: String,
    pub pattern: String,
    pub condition: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MaudeModule {
    pub name: String,
    pub imports: Vec<String>,
    pub sorts: Vec<String>,
    pub subsorts: Vec<(Vec<String>, String)>,
    pub ops: Vec<OpDecl>,
    pub vars: Vec<(Vec<String>, String)>,
    pub equations: Vec<EquationBlock>,
    /// One rewrite rule per transition, in program order.
    pub rules: Vec<RewriteRule>,
    /// The environment step.
    pub tick: RewriteRule,
    pub searches: Vec<SearchCommand>,
}

impl MaudeModule {
    pub fn conditional_rules(&self) -> usize {
        self.rules.iter().filter(|r| r.condition.is_some()).count()
    }

    pub fn unconditional_rules(&self) -> usize {
        self.rules.len() - self.conditional_rules()
    }
}

/// A Maude string literal.
pub fn lit(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if c == '"' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn op(name: &str, arity: &[&str], coarity: &str, attrs: &[&str]) -> OpDecl {
    OpDecl {
        name: name.into(),
        arity: arity.iter().map(|s| s.to_string()).collect(),
        coarity: coarity.into(),
        attrs: attrs.iter().map(|s| s.to_string()).collect(),
    }
}

fn eq(lhs: impl Into<String>, rhs: impl Into<String>) -> Equation {
    Equation { lhs: lhs.into(), rhs: rhs.into(), condition: None, owise: false }
}

fn ceq(lhs: impl Into<String>, rhs: impl Into<String>, cond: impl Into<String>) -> Equation {
    Equation { lhs: lhs.into(), rhs: rhs.into(), condition: Some(cond.into()), owise: false }
}

fn owise(lhs: impl Into<String>, rhs: impl Into<String>) -> Equation {
    Equation { lhs: lhs.into(), rhs: rhs.into(), condition: None, owise: true }
}

fn block(title: &str, equations: Vec<Equation>) -> EquationBlock {
    EquationBlock { title: title.into(), equations }
}

fn soup(items: Vec<String>) -> String {
    if items.is_empty() {
        "none".into()
    } else {
        items.join(" ")
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// `K * A op B` over integers, equivalent to `min + K * g op value`.
fn grid_comparison(var: &str, min: Quantity, g: Quantity, cmp: Comparator, value: Quantity) -> String {
    let d = value - min;
    let mut a = g.numer() * d.denom();
    let mut b = d.numer() * g.denom();
    let k = gcd(a, b).max(1);
    a /= k;
    b /= k;
    let symbol = match cmp {
        Comparator::Eq => "==",
        Comparator::Ne => "=/=",
        other => other.symbol(),
    };
    if a == 1 {
        format!("{var} {symbol} {b}")
    } else {
        format!("{var} * {a} {symbol} {b}")
    }
}

fn label_for(rule: &str, taken: &mut BTreeSet<String>) -> String {
    let body: String = rule.chars().map(|c| if c.is_ascii_alphanumeric() { c } else { '-' }).collect();
    let base = format!("r-{body}");
    let mut label = base.clone();
    let mut n = 2;
    while !taken.insert(label.clone()) {
        label = format!("{base}-{n}");
        n += 1;
    }
    label
}

struct Lowered {
    lhs: Vec<String>,
    rhs: Vec<String>,
    condition: Vec<String>,
    /// `None` when some action is sure to change its device.
    guard: Option<Vec<String>>,
    device_vars: usize,
    env_vars: usize,
}

struct Context<'a> {
    program: &'a AdapterProgram,
    spec: &'a ConflictSpec,
}

impl Context<'_> {
    fn device(&self, id: &str) -> &ModelDevice {
        self.program.devices().find(|d| d.id == id).expect("validated device")
    }

    fn term(&self, d: &ModelDevice, state: &str) -> String {
        format!("device({}, {}, {state}, {})", lit(&d.id), lit(&d.device_type), lit(&d.location))
    }

    fn lower_transition(&self, t: &ModelTransition) -> Lowered {
        let mut order: Vec<&str> = Vec::new();
        for (d, _) in t.pre.iter().chain(&t.post) {
            if !order.contains(&d.as_str()) {
                order.push(d);
            }
        }
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        let mut unpinned: Vec<(&str, String)> = Vec::new();
        for id in &order {
            let d = self.device(id);
            let post = t.post.iter().find(|(p, _)| p == id).map(|(_, s)| lit(s));
            let pins: Vec<&String> = t.pre.iter().filter(|(p, _)| p == id).map(|(_, s)| s).collect();
            if pins.is_empty() {
                let var = format!("D{}", unpinned.len() + 1);
                lhs.push(self.term(d, &var));
                rhs.push(self.term(d, post.as_deref().unwrap_or(&var)));
                unpinned.push((id, var));
            } else {
                for pin in pins {
                    lhs.push(self.term(d, &lit(pin)));
                    rhs.push(self.term(d, post.as_deref().unwrap_or(&lit(pin))));
                }
            }
        }

        let mut guard = Some(Vec::new());
        for (id, state) in &t.post {
            let pinned: Vec<&String> = t.pre.iter().filter(|(p, _)| p == id).map(|(_, s)| s).collect();
            match pinned.first() {
                Some(p) if pinned.len() == 1 && *p == state => {}
                Some(_) => guard = None,
                None => {
                    let var = &unpinned.iter().find(|(d, _)| d == id).expect("unpinned device").1;
                    if let Some(g) = guard.as_mut() {
                        g.push(format!("{var} =/= {}", lit(state)));
                    }
                }
            }
            if guard.is_none() {
                break;
            }
        }

        let mut env_order: Vec<String> = Vec::new();
        let mut condition = Vec::new();
        let env_var = |name: &str, env_order: &mut Vec<String>| -> String {
            let pos = env_order.iter().position(|n| n == name).unwrap_or_else(|| {
                env_order.push(name.to_string());
                env_order.len() - 1
            });
            format!("E{}", pos + 1)
        };
        for atom in &t.condition {
            match atom {
                TriggerAtom::Env { variable, cmp, value } => {
                    let v = self.spec.variable(variable).expect("validated variable");
                    let k = env_var(variable, &mut env_order);
                    condition.push(grid_comparison(&k, v.min, v.granularity, *cmp, *value));
                }
                TriggerAtom::Time { minutes } => {
                    let k = env_var(crate::model::CLOCK, &mut env_order);
                    let step = minutes.div_ceil(self.spec.clock_tick);
                    condition.push(format!("{k} == {step}"));
                }
                TriggerAtom::State { .. } => unreachable!("validated condition"),
            }
        }
        for (i, name) in env_order.iter().enumerate() {
            let item = format!("env({}, E{})", lit(name), i + 1);
            lhs.push(item.clone());
            rhs.push(item);
        }
        Lowered { lhs, rhs, condition, guard, device_vars: unpinned.len(), env_vars: env_order.len() }
    }
}

/// Lowers a validated program. The program is also built into a transition
/// system, so every error the native path reports is reported here too.
pub fn lower_to_maude(program: &AdapterProgram, spec: &ConflictSpec) -> Result<MaudeModule, ProgramError> {
    let sys = program.to_system(spec)?;
    Ok(lower_validated(program, spec, &sys))
}

/// Equivalent to lowering the system's canonical program.
pub fn lower_system_to_maude(sys: &TransitionSystem) -> MaudeModule {
    lower_to_maude(&canonical_program(sys), sys.spec()).expect("a built system's canonical program is valid")
}

fn lower_validated(program: &AdapterProgram, spec: &ConflictSpec, sys: &TransitionSystem) -> MaudeModule {
    let cx = Context { program, spec };
    let clock_steps = MINUTES_PER_DAY / spec.clock_tick;
    let devices: Vec<&ModelDevice> = program.devices().collect();
    let transitions: Vec<&ModelTransition> = program.transitions().collect();
    let lowered: Vec<Lowered> = transitions.iter().map(|t| cx.lower_transition(t)).collect();

    let init = sys.initial();
    let mut init_items: Vec<String> = Vec::new();
    for d in &devices {
        let state = match &d.sensor {
            Some(sensor) => sensor.reading(init.env_values[&sensor.variable]).expect("sensors have readings").to_string(),
            None => init.device_states[&d.id].clone(),
        };
        init_items.push(cx.term(d, &lit(&state)));
    }
    for v in &spec.env_vars {
        let k = (init.env_values[&v.name] - v.min) / v.granularity;
        init_items.push(format!("env({}, {})", lit(&v.name), k.numer()));
    }
    let clock = init.clock().expect("systems carry a clock").numer() / spec.clock_tick as i64;
    init_items.push(format!("env({}, {clock})", lit(crate::model::CLOCK)));

    let mut dynamics = Vec::new();
    for e in &spec.effects {
        let g = spec.variable(&e.variable).expect("validated effect").granularity;
        dynamics.push(eq(
            format!("eff({}, {}, {})", lit(&e.variable), lit(&e.device_type), lit(&e.state)),
            (e.delta_per_tick / g).round().to_string(),
        ));
    }
    dynamics.push(owise("eff(V, T, S)", "0"));
    dynamics.push(eq("delta(V, none)", "0"));
    dynamics.push(ceq("delta(V, device(I, T, S, L) X)", "eff(V, T, S) + delta(V, X)", "not isSensor(I)"));
    dynamics.push(ceq("delta(V, device(I, T, S, L) X)", "delta(V, X)", "isSensor(I)"));
    dynamics.push(eq("delta(V, env(W, K) X)", "delta(V, X)"));
    for v in &spec.env_vars {
        dynamics.push(eq(format!("top({})", lit(&v.name)), v.steps().to_string()));
    }
    dynamics.push(eq("bound(K, N)", "if K < 0 then 0 else if K > N then N else K fi fi"));
    for d in devices.iter().filter(|d| d.sensor.is_some()) {
        dynamics.push(eq(format!("isSensor({})", lit(&d.id)), "true"));
    }
    dynamics.push(owise("isSensor(I)", "false"));
    dynamics.push(eq("shift(none, H)", "none"));
    dynamics.push(eq("shift(device(I, T, S, L) X, H)", "device(I, T, S, L) shift(X, H)"));
    dynamics.push(eq(
        "shift(env(\"clock\", K) X, H)",
        format!("env(\"clock\", (K + 1) rem {clock_steps}) shift(X, H)"),
    ));
    dynamics.push(ceq(
        "shift(env(V, K) X, H)",
        "env(V, bound(K + delta(V, H), top(V))) shift(X, H)",
        "V =/= \"clock\"",
    ));
    for d in &devices {
        let Some(sensor) = &d.sensor else { continue };
        let v = spec.variable(&sensor.variable).expect("validated sensor");
        let mut body = lit(&sensor.readings[0].0);
        for (state, bound) in &sensor.readings[1..] {
            let test = grid_comparison("K", v.min, v.granularity, Comparator::Ge, *bound);
            body = format!("if {test} then {} else {body} fi", lit(state));
        }
        dynamics.push(eq(format!("reading({}, S, env({}, K) H)", lit(&d.id), lit(&sensor.variable)), body));
    }
    dynamics.push(owise("reading(I, S, H)", "S"));
    dynamics.push(eq("sense(none, H)", "none"));
    dynamics.push(eq("sense(env(V, K) X, H)", "env(V, K) sense(X, H)"));
    dynamics.push(eq("sense(device(I, T, S, L) X, H)", "device(I, T, reading(I, S, H), L) sense(X, H)"));
    dynamics.push(eq("settle(H)", "sense(H, H)"));
    dynamics.push(eq("next(H)", "settle(shift(H, H))"));

    let mut facts = Vec::new();
    let mut outs = Vec::new();
    for t in &transitions {
        for (d, s) in &t.post {
            let dev = cx.device(d);
            outs.push(format!("out({}, {}, {}, {})", lit(&t.rule), lit(d), lit(&dev.device_type), lit(s)));
        }
    }
    facts.push(eq("results", soup(outs)));
    facts.push(eq("ruleIds", soup(transitions.iter().map(|t| format!("rid({})", lit(&t.rule))).collect())));
    for t in &transitions {
        let needs = t
            .pre
            .iter()
            .filter(|(d, _)| cx.device(d).sensor.is_none())
            .map(|(d, s)| format!("need({}, {})", lit(d), lit(s)))
            .collect();
        facts.push(eq(format!("needs({})", lit(&t.rule)), soup(needs)));
    }

    let mut pairs = Vec::new();
    let mut cs: BTreeSet<(String, String, String)> = BTreeSet::new();
    for p in &spec.state_pairs {
        cs.insert((p.device_type.clone(), p.first.clone(), p.second.clone()));
        cs.insert((p.device_type.clone(), p.second.clone(), p.first.clone()));
    }
    for (t, a, b) in &cs {
        pairs.push(eq(format!("csPair({}, {}, {})", lit(t), lit(a), lit(b)), "true"));
    }
    pairs.push(owise("csPair(T, S, S2)", "false"));
    let mut ce: BTreeSet<((String, String), (String, String))> = BTreeSet::new();
    for p in &derive_env_pairs(spec).pairs {
        ce.insert((p.first.clone(), p.second.clone()));
        ce.insert((p.second.clone(), p.first.clone()));
    }
    for ((ta, sa), (tb, sb)) in &ce {
        pairs.push(eq(format!("cePair({}, {}, {}, {})", lit(ta), lit(sa), lit(tb), lit(sb)), "true"));
    }
    pairs.push(owise("cePair(T, S, T2, S2)", "false"));

    let mut preds = vec![
        ceq("isInCS(out(R, I, T, S) out(R2, I, T, S2) X)", "true", "R =/= R2 /\\ csPair(T, S, S2)"),
        owise("isInCS(X)", "false"),
        ceq("isInCE(out(R, I, T, S) out(R2, I2, T2, S2) X)", "true", "R =/= R2 /\\ cePair(T, S, T2, S2)"),
        owise("isInCE(X)", "false"),
        ceq("produced(R, I, S, out(R2, I, T, S) X)", "true", "R =/= R2"),
        owise("produced(R, I, S, X)", "false"),
        eq("covers(R, none)", "true"),
        ceq("covers(R, need(I, S) X)", "covers(R, X)", "produced(R, I, S, results)"),
        owise("covers(R, X)", "false"),
        ceq("isExist(rid(R) X)", "true", "needs(R) =/= none /\\ covers(R, needs(R))"),
        owise("isExist(X)", "false"),
    ];
    for (t, l) in transitions.iter().zip(&lowered) {
        let lhs = format!("enabled({}, {})", lit(&t.rule), l.lhs.iter().cloned().chain(["H".to_string()]).collect::<Vec<_>>().join(" "));
        let mut cond = l.condition.clone();
        match &l.guard {
            None => {}
            Some(g) if g.is_empty() => continue,
            Some(g) if g.len() == 1 => cond.push(g[0].clone()),
            Some(g) => cond.push(format!("({})", g.join(" or "))),
        }
        if cond.is_empty() {
            preds.push(eq(lhs, "true"));
        } else {
            preds.push(ceq(lhs, "true", cond.join(" /\\ ")));
        }
    }
    preds.push(owise("enabled(R, H)", "false"));
    preds.push(eq(
        "orbitHits(R, H, N)",
        "if N <= 0 then false else enabled(R, H) or orbitHits(R, next(H), N - 1) fi",
    ));
    preds.push(eq(
        "candidate(R)",
        format!(
            "not enabled(R, initSoup) and covers(R, needs(R)) and not orbitHits(R, initSoup, {})",
            sys.tick_orbit().len()
        ),
    ));
    preds.push(ceq("cascadeEnv(rid(R) X, H)", "true", "candidate(R) /\\ enabled(R, H)"));
    preds.push(owise("cascadeEnv(X, H)", "false"));

    let equations = vec![
        block("initial state", vec![eq("initSoup", soup(init_items)), eq("init", "{initSoup}")]),
        block("environment dynamics", dynamics),
        block("rule results and trigger states", facts),
        block("conflicting pairs", pairs),
        block("conflict predicates", preds),
    ];

    let mut taken = BTreeSet::from(["tick".to_string()]);
    let mut rules = Vec::new();
    for (t, l) in transitions.iter().zip(&lowered) {
        let wrap = |items: &[String]| format!("{{{}}}", items.iter().cloned().chain(["H".to_string()]).collect::<Vec<_>>().join(" "));
        rules.push(RewriteRule {
            label: label_for(&t.rule, &mut taken),
            lhs: wrap(&l.lhs),
            rhs: wrap(&l.rhs),
            condition: (!l.condition.is_empty()).then(|| l.condition.join(" /\\ ")),
        });
    }
    let tick = RewriteRule { label: "tick".into(), lhs: "{H}".into(), rhs: "{next(H)}".into(), condition: None };

    let mut vars = vec![
        (["I", "I2", "T", "T2", "L", "S", "S2", "R", "R2", "V", "W"].map(String::from).to_vec(), "String".to_string()),
        (vec!["K".into(), "N".into()], "Int".into()),
        (vec!["H".into(), "X".into()], "Soup".into()),
    ];
    let nd = lowered.iter().map(|l| l.device_vars).max().unwrap_or(0);
    if nd > 0 {
        vars.push(((1..=nd).map(|i| format!("D{i}")).collect(), "String".into()));
    }
    let ne = lowered.iter().map(|l| l.env_vars).max().unwrap_or(0);
    if ne > 0 {
        vars.push(((1..=ne).map(|i| format!("E{i}")).collect(), "Int".into()));
    }

    let search = |kind, depth, start: &str, pattern: &str, condition: &str| SearchCommand {
        kind,
        depth,
        start: start.into(),
        pattern: pattern.into(),
        condition: condition.into(),
    };
    let searches = vec![
        search(ConflictKind::StateConflict, None, "results", "X", "isInCS(X)"),
        search(ConflictKind::EnvironmentConflict, None, "results", "X", "isInCE(X)"),
        search(ConflictKind::StateCascading, None, "ruleIds", "X", "isExist(X)"),
        search(ConflictKind::StateEnvCascading, Some(spec.depth_bound), "init", "{H}", "cascadeEnv(ruleIds, H)"),
    ];

    MaudeModule {
        name: "HOME".into(),
        imports: vec!["STRING".into(), "INT".into()],
        sorts: ["Device", "Env", "Fact", "Soup", "Home"].map(String::from).to_vec(),
        subsorts: vec![(vec!["Device".into(), "Env".into(), "Fact".into()], "Soup".into())],
        ops: base_ops(),
        vars,
        equations,
        rules,
        tick,
        searches,
    }
}

fn base_ops() -> Vec<OpDecl> {
    vec![
        op("none", &[], "Soup", &["ctor"]),
        op("__", &["Soup", "Soup"], "Soup", &["ctor", "assoc", "comm", "id: none"]),
        op("device", &["String", "String", "String", "String"], "Device", &["ctor"]),
        op("env", &["String", "Int"], "Env", &["ctor"]),
        op("out", &["String", "String", "String", "String"], "Fact", &["ctor"]),
        op("need", &["String", "String"], "Fact", &["ctor"]),
        op("rid", &["String"], "Fact", &["ctor"]),
        op("{_}", &["Soup"], "Home", &["ctor"]),
        op("initSoup", &[], "Soup", &[]),
        op("init", &[], "Home", &[]),
        op("eff", &["String", "String", "String"], "Int", &[]),
        op("delta", &["String", "Soup"], "Int", &[]),
        op("top", &["String"], "Int", &[]),
        op("bound", &["Int", "Int"], "Int", &[]),
        op("isSensor", &["String"], "Bool", &[]),
        op("shift", &["Soup", "Soup"], "Soup", &[]),
        op("reading", &["String", "String", "Soup"], "String", &[]),
        op("sense", &["Soup", "Soup"], "Soup", &[]),
        op("settle", &["Soup"], "Soup", &[]),
        op("next", &["Soup"], "Soup", &[]),
        op("results", &[], "Soup", &[]),
        op("ruleIds", &[], "Soup", &[]),
        op("needs", &["String"], "Soup", &[]),
        op("csPair", &["String", "String", "String"], "Bool", &[]),
        op("cePair", &["String", "String", "String", "String"], "Bool", &[]),
        op("isInCS", &["Soup"], "Bool", &[]),
        op("isInCE", &["Soup"], "Bool", &[]),
        op("produced", &["String", "String", "String", "Soup"], "Bool", &[]),
        op("covers", &["String", "Soup"], "Bool", &[]),
        op("isExist", &["Soup"], "Bool", &[]),
        op("enabled", &["String", "Soup"], "Bool", &[]),
        op("orbitHits", &["String", "Soup", "Int"], "Bool", &[]),
        op("candidate", &["String"], "Bool", &["memo"]),
        op("cascadeEnv", &["Soup", "Soup"], "Bool", &[]),
    ]
}
