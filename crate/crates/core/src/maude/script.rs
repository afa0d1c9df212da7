//! The restricted call script that stands between an LLM and Maude.
//!
//! ```text
//! script  := ( call ";"? )*
//! call    := name "(" arg ( "," arg )* ")"
//! arg     := literal | ident "=" literal
//! literal := string | number | "[" strings "]" | "{" string ":" literal, ... "}"
//! ```
//!
//! Three calls are understood:
//!
//! ```text
//! model_device("lamp1", ["off", "on"], type="light", location="room1")
//! model_state_transition("R1", {"lamp1": "off"}, {"lamp1": "on"}, "illuminance < 40")
//! define_initial_state({"lamp1": "off", "illuminance": 20, "clock": "21:30"})
//! ```
//!
//! `model_device` also accepts `sensor_of="var"` and `readings={"state": bound}`.
//! `#` starts a comment that runs to the end of the line.

use std::collections::{HashMap, HashSet};
use std::fmt;

use crate::io::{format_trigger, parse_trigger};
use crate::model::{format_clock, parse_clock, SensorBinding, TriggerAtom, CLOCK};
use crate::quantity::Quantity;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("line {line}, column {column}: {message}")]
pub struct ScriptError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelDevice {
    pub id: String,
    pub states: Vec<String>,
    pub device_type: String,
    pub location: String,
    pub sensor: Option<SensorBinding>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ModelTransition {
    pub rule: String,
    /// Device states required before firing. A device may appear twice only
    /// with contradictory states, which makes the transition dead.
    pub pre: Vec<(String, String)>,
    /// Device states after firing, in action order; the last entry for a
    /// device wins.
    pub post: Vec<(String, String)>,
    /// Environment and time atoms.
    pub condition: Vec<TriggerAtom>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InitialValue {
    State(String),
    Number(Quantity),
    /// Minutes of day.
    Clock(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Call {
    ModelDevice(ModelDevice),
    ModelStateTransition(ModelTransition),
    DefineInitialState(Vec<(String, InitialValue)>),
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdapterProgram {
    pub calls: Vec<Call>,
}

/// A broken program invariant, located by call and argument index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProgramIssue {
    pub call: usize,
    pub arg: usize,
    pub message: String,
}

impl fmt::Display for ProgramIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "call {}: {}", self.call + 1, self.message)
    }
}

impl AdapterProgram {
    pub fn devices(&self) -> impl Iterator<Item = &ModelDevice> {
        self.calls.iter().filter_map(|c| match c {
            Call::ModelDevice(d) => Some(d),
            _ => None,
        })
    }

    pub fn transitions(&self) -> impl Iterator<Item = &ModelTransition> {
        self.calls.iter().filter_map(|c| match c {
            Call::ModelStateTransition(t) => Some(t),
            _ => None,
        })
    }

    /// The assignments of the (first) `define_initial_state` call.
    pub fn initial(&self) -> &[(String, InitialValue)] {
        self.calls
            .iter()
            .find_map(|c| match c {
                Call::DefineInitialState(a) => Some(a.as_slice()),
                _ => None,
            })
            .unwrap_or(&[])
    }

    /// Checks declaration-before-use and the single initial state.
    pub fn validate(&self) -> Result<(), ProgramIssue> {
        let issue = |call: usize, arg: usize, message: String| ProgramIssue { call, arg, message };
        let mut devices: HashMap<&str, &ModelDevice> = HashMap::new();
        let mut rules: HashSet<&str> = HashSet::new();
        let mut initial_calls = 0;
        for (c, call) in self.calls.iter().enumerate() {
            match call {
                Call::ModelDevice(d) => {
                    if d.id.is_empty() || d.id == CLOCK {
                        return Err(issue(c, 0, format!("invalid device id `{}`", d.id)));
                    }
                    if devices.contains_key(d.id.as_str()) {
                        return Err(issue(c, 0, format!("device {} declared twice", d.id)));
                    }
                    if d.states.is_empty() {
                        return Err(issue(c, 1, format!("device {} has no states", d.id)));
                    }
                    let unique: HashSet<&String> = d.states.iter().collect();
                    if unique.len() != d.states.len() {
                        return Err(issue(c, 1, format!("device {} repeats a state", d.id)));
                    }
                    if let Some(sensor) = &d.sensor {
                        for (state, _) in &sensor.readings {
                            if !d.states.contains(state) {
                                return Err(issue(c, 2, format!("undeclared state {state} of device {}", d.id)));
                            }
                        }
                    }
                    devices.insert(&d.id, d);
                }
                Call::ModelStateTransition(t) => {
                    if !rules.insert(&t.rule) {
                        return Err(issue(c, 0, format!("transition {} declared twice", t.rule)));
                    }
                    for (arg, map) in [(1, &t.pre), (2, &t.post)] {
                        for (dev, state) in map {
                            let d = devices.get(dev.as_str()).ok_or_else(|| issue(c, arg, format!("undeclared device {dev}")))?;
                            if !d.states.contains(state) {
                                return Err(issue(c, arg, format!("undeclared state {state} of device {dev}")));
                            }
                            if arg == 2 && d.sensor.is_some() {
                                return Err(issue(c, arg, format!("sensor {dev} cannot be set by a transition")));
                            }
                        }
                    }
                    if t.post.is_empty() {
                        return Err(issue(c, 2, format!("transition {} sets no device", t.rule)));
                    }
                    if t.condition.iter().any(|a| matches!(a, TriggerAtom::State { .. })) {
                        return Err(issue(c, 3, "device states belong in the pre-state map, not the condition".into()));
                    }
                }
                Call::DefineInitialState(assignments) => {
                    initial_calls += 1;
                    if initial_calls > 1 {
                        return Err(issue(c, 0, "define_initial_state may appear only once".into()));
                    }
                    for (key, value) in assignments {
                        match (devices.get(key.as_str()), value) {
                            (Some(d), InitialValue::State(s)) if !d.states.contains(s) => {
                                return Err(issue(c, 0, format!("undeclared state {s} of device {key}")))
                            }
                            (Some(_), InitialValue::State(_)) => {}
                            (Some(_), _) => return Err(issue(c, 0, format!("device {key} needs a state name"))),
                            (None, InitialValue::State(_)) => return Err(issue(c, 0, format!("undeclared device {key}"))),
                            (None, InitialValue::Clock(_)) if key != CLOCK => {
                                return Err(issue(c, 0, format!("only `clock` takes a time of day, not {key}")))
                            }
                            (None, _) => {}
                        }
                    }
                }
            }
        }
        if initial_calls == 0 {
            return Err(issue(self.calls.len().saturating_sub(1), 0, "missing define_initial_state".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Lit {
    Str(String),
    Num(Quantity),
    List(Vec<(Pos, Lit)>),
    Map(Vec<(Pos, String, Lit)>),
}

impl Lit {
    fn describe(&self) -> &'static str {
        match self {
            Lit::Str(_) => "a string",
            Lit::Num(_) => "a number",
            Lit::List(_) => "a list",
            Lit::Map(_) => "a map",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Pos {
    line: usize,
    column: usize,
}

struct Arg {
    pos: Pos,
    keyword: Option<String>,
    value: Lit,
}

struct Parser {
    chars: Vec<char>,
    i: usize,
    line: usize,
    line_start: usize,
}

impl Parser {
    fn new(text: &str) -> Self {
        Parser { chars: text.chars().collect(), i: 0, line: 1, line_start: 0 }
    }

    fn pos(&self) -> Pos {
        Pos { line: self.line, column: self.i - self.line_start + 1 }
    }

    fn fail<T>(&self, pos: Pos, message: impl Into<String>) -> Result<T, ScriptError> {
        Err(ScriptError { line: pos.line, column: pos.column, message: message.into() })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.i).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.i += 1;
        if c == '\n' {
            self.line += 1;
            self.line_start = self.i;
        }
        Some(c)
    }

    fn skip_blank(&mut self) {
        while let Some(c) = self.peek() {
            if c == '#' {
                while self.peek().is_some_and(|c| c != '\n') {
                    self.bump();
                }
            } else if c.is_whitespace() {
                self.bump();
            } else {
                break;
            }
        }
    }

    fn expect(&mut self, want: char) -> Result<(), ScriptError> {
        self.skip_blank();
        let pos = self.pos();
        match self.peek() {
            Some(c) if c == want => {
                self.bump();
                Ok(())
            }
            Some(c) => self.fail(pos, format!("expected `{want}`, found `{c}`")),
            None => self.fail(pos, format!("expected `{want}`, found end of input")),
        }
    }

    fn ident(&mut self) -> String {
        let mut out = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_ascii_alphanumeric() || *c == '_') {
            out.push(c);
            self.bump();
        }
        out
    }

    fn string(&mut self) -> Result<String, ScriptError> {
        let start = self.pos();
        self.bump();
        let mut out = String::new();
        loop {
            match self.bump() {
                None | Some('\n') => return self.fail(start, "unterminated string"),
                Some('"') => return Ok(out),
                Some('\\') => match self.bump() {
                    Some('"') => out.push('"'),
                    Some('\\') => out.push('\\'),
                    Some('n') => out.push('\n'),
                    _ => return self.fail(start, "unsupported escape in string"),
                },
                Some(c) => out.push(c),
            }
        }
    }

    fn number(&mut self) -> Result<Quantity, ScriptError> {
        let start = self.pos();
        let mut text = String::new();
        while let Some(c) = self.peek().filter(|c| c.is_ascii_digit() || matches!(c, '-' | '.' | '/')) {
            text.push(c);
            self.bump();
        }
        text.parse().or_else(|_| self.fail(start, format!("invalid number `{text}`")))
    }

    fn literal(&mut self) -> Result<Lit, ScriptError> {
        self.skip_blank();
        let pos = self.pos();
        match self.peek() {
            Some('"') => Ok(Lit::Str(self.string()?)),
            Some(c) if c.is_ascii_digit() || c == '-' => Ok(Lit::Num(self.number()?)),
            Some('[') => {
                self.bump();
                let mut items = Vec::new();
                self.skip_blank();
                if self.peek() == Some(']') {
                    self.bump();
                    return Ok(Lit::List(items));
                }
                loop {
                    self.skip_blank();
                    let at = self.pos();
                    items.push((at, self.literal()?));
                    self.skip_blank();
                    match self.bump() {
                        Some(',') => continue,
                        Some(']') => return Ok(Lit::List(items)),
                        _ => return self.fail(self.pos(), "expected `,` or `]` in list"),
                    }
                }
            }
            Some('{') => {
                self.bump();
                let mut entries = Vec::new();
                self.skip_blank();
                if self.peek() == Some('}') {
                    self.bump();
                    return Ok(Lit::Map(entries));
                }
                loop {
                    self.skip_blank();
                    let at = self.pos();
                    if self.peek() != Some('"') {
                        return self.fail(at, "map keys must be strings");
                    }
                    let key = self.string()?;
                    self.expect(':')?;
                    let value = self.literal()?;
                    entries.push((at, key, value));
                    self.skip_blank();
                    match self.bump() {
                        Some(',') => continue,
                        Some('}') => return Ok(Lit::Map(entries)),
                        _ => return self.fail(self.pos(), "expected `,` or `}` in map"),
                    }
                }
            }
            Some(c) => self.fail(pos, format!("expected a value, found `{c}`")),
            None => self.fail(pos, "expected a value, found end of input"),
        }
    }

    fn args(&mut self) -> Result<Vec<Arg>, ScriptError> {
        self.expect('(')?;
        let mut args = Vec::new();
        self.skip_blank();
        if self.peek() == Some(')') {
            self.bump();
            return Ok(args);
        }
        loop {
            self.skip_blank();
            let pos = self.pos();
            let keyword = if self.peek().is_some_and(|c| c.is_ascii_alphabetic()) {
                let k = self.ident();
                self.expect('=')?;
                Some(k)
            } else {
                None
            };
            let value = self.literal()?;
            args.push(Arg { pos, keyword, value });
            self.skip_blank();
            let at = self.pos();
            match self.bump() {
                Some(',') => continue,
                Some(')') => return Ok(args),
                _ => return self.fail(at, "expected `,` or `)` after argument"),
            }
        }
    }
}

struct Located {
    call: Call,
    pos: Pos,
    arg_pos: Vec<Pos>,
}

fn as_str(p: &Parser, pos: Pos, lit: Lit, what: &str) -> Result<String, ScriptError> {
    match lit {
        Lit::Str(s) => Ok(s),
        other => p.fail(pos, format!("{what} must be a string, found {}", other.describe())),
    }
}

fn as_state_map(p: &Parser, pos: Pos, lit: Lit, what: &str) -> Result<Vec<(String, String)>, ScriptError> {
    match lit {
        Lit::Map(entries) => entries
            .into_iter()
            .map(|(at, k, v)| Ok((k, as_str(p, at, v, "a device state")?)))
            .collect(),
        other => p.fail(pos, format!("{what} must be a map, found {}", other.describe())),
    }
}

fn build_call(p: &Parser, name: &str, pos: Pos, args: Vec<Arg>) -> Result<Located, ScriptError> {
    let arg_pos: Vec<Pos> = args.iter().map(|a| a.pos).collect();
    let mut positional = Vec::new();
    let mut keywords = Vec::new();
    for a in args {
        match a.keyword {
            None if !keywords.is_empty() => return p.fail(a.pos, "positional argument after keyword argument"),
            None => positional.push((a.pos, a.value)),
            Some(k) => keywords.push((a.pos, k, a.value)),
        }
    }
    let arity = |min: usize, max: usize| -> Result<(), ScriptError> {
        if positional.len() < min || positional.len() > max {
            let want = if min == max { min.to_string() } else { format!("{min} or {max}") };
            return p.fail(pos, format!("{name} takes {want} positional arguments, found {}", positional.len()));
        }
        Ok(())
    };
    let call = match name {
        "model_device" => {
            arity(2, 2)?;
            let mut it = positional.into_iter();
            let (ip, id) = it.next().expect("arity checked");
            let (sp, states) = it.next().expect("arity checked");
            let id = as_str(p, ip, id, "device id")?;
            let states = match states {
                Lit::List(items) => items
                    .into_iter()
                    .map(|(at, v)| as_str(p, at, v, "a state"))
                    .collect::<Result<Vec<_>, _>>()?,
                other => return p.fail(sp, format!("states must be a list, found {}", other.describe())),
            };
            let mut device = ModelDevice { device_type: id.clone(), id, states, location: String::new(), sensor: None };
            let mut sensor_of = None;
            let mut readings = None;
            for (kp, k, v) in keywords {
                match k.as_str() {
                    "type" => device.device_type = as_str(p, kp, v, "type")?,
                    "location" => device.location = as_str(p, kp, v, "location")?,
                    "sensor_of" => sensor_of = Some((kp, as_str(p, kp, v, "sensor_of")?)),
                    "readings" => match v {
                        Lit::Map(entries) => {
                            let mut list = Vec::new();
                            for (at, state, bound) in entries {
                                match bound {
                                    Lit::Num(q) => list.push((state, q)),
                                    other => return p.fail(at, format!("a reading bound must be a number, found {}", other.describe())),
                                }
                            }
                            list.sort_by(|a, b| a.1.cmp(&b.1));
                            readings = Some((kp, list));
                        }
                        other => return p.fail(kp, format!("readings must be a map, found {}", other.describe())),
                    },
                    _ => return p.fail(kp, format!("model_device has no parameter `{k}`")),
                }
            }
            device.sensor = match (sensor_of, readings) {
                (None, None) => None,
                (Some((_, variable)), Some((_, readings))) => Some(SensorBinding { variable, readings }),
                (Some((at, _)), None) => return p.fail(at, "sensor_of requires readings"),
                (None, Some((at, _))) => return p.fail(at, "readings requires sensor_of"),
            };
            Call::ModelDevice(device)
        }
        "model_state_transition" => {
            arity(3, 4)?;
            if let Some((kp, k, _)) = keywords.first() {
                return p.fail(*kp, format!("model_state_transition has no parameter `{k}`"));
            }
            let mut it = positional.into_iter();
            let (rp, rule) = it.next().expect("arity checked");
            let (pp, pre) = it.next().expect("arity checked");
            let (qp, post) = it.next().expect("arity checked");
            let rule = as_str(p, rp, rule, "transition id")?;
            let pre = as_state_map(p, pp, pre, "pre-states")?;
            let post = as_state_map(p, qp, post, "post-states")?;
            let condition = match it.next() {
                None => Vec::new(),
                Some((cp, lit)) => {
                    let text = as_str(p, cp, lit, "condition")?;
                    if text.trim().is_empty() {
                        Vec::new()
                    } else {
                        parse_trigger(&text).or_else(|e| {
                            // Columns inside the string start one past the quote.
                            p.fail(Pos { line: cp.line, column: cp.column + e.column }, format!("in condition: {}", e.message))
                        })?
                    }
                }
            };
            let mut seen = HashSet::new();
            let pre = pre.into_iter().filter(|kv| seen.insert(kv.clone())).collect();
            Call::ModelStateTransition(ModelTransition { rule, pre, post, condition })
        }
        "define_initial_state" => {
            arity(1, 1)?;
            if let Some((kp, k, _)) = keywords.first() {
                return p.fail(*kp, format!("define_initial_state has no parameter `{k}`"));
            }
            let (mp, map) = positional.into_iter().next().expect("arity checked");
            let entries = match map {
                Lit::Map(entries) => entries,
                other => return p.fail(mp, format!("initial state must be a map, found {}", other.describe())),
            };
            let mut out = Vec::new();
            for (at, key, value) in entries {
                let value = match value {
                    Lit::Num(q) => InitialValue::Number(q),
                    Lit::Str(s) if key == CLOCK => match parse_clock(&s) {
                        Some(m) => InitialValue::Clock(m),
                        None => return p.fail(at, format!("invalid time of day `{s}`")),
                    },
                    Lit::Str(s) => InitialValue::State(s),
                    other => return p.fail(at, format!("`{key}` must be a state or a number, found {}", other.describe())),
                };
                out.push((key, value));
            }
            Call::DefineInitialState(out)
        }
        _ => return p.fail(pos, format!("unknown call `{name}`")),
    };
    Ok(Located { call, pos, arg_pos })
}

/// Parses and validates a call script. Every error carries a line and column.
pub fn parse_logic_script(text: &str) -> Result<AdapterProgram, ScriptError> {
    let mut p = Parser::new(text);
    let mut located = Vec::new();
    loop {
        p.skip_blank();
        let pos = p.pos();
        match p.peek() {
            None => break,
            Some(';') => {
                p.bump();
                continue;
            }
            Some(c) if c.is_ascii_alphabetic() => {}
            Some(c) => return p.fail(pos, format!("expected a call, found `{c}`")),
        }
        let name = p.ident();
        let args = p.args()?;
        located.push(build_call(&p, &name, pos, args)?);
    }
    let program = AdapterProgram { calls: located.iter().map(|l| l.call.clone()).collect() };
    if let Err(issue) = program.validate() {
        let pos = located
            .get(issue.call)
            .map(|l| l.arg_pos.get(issue.arg).copied().unwrap_or(l.pos))
            .unwrap_or(p.pos());
        return p.fail(pos, issue.message);
    }
    Ok(program)
}

fn quote(s: &str) -> String {
    serde_json::to_string(s).expect("strings serialize")
}

fn state_map(pairs: &[(String, String)]) -> String {
    let body: Vec<String> = pairs.iter().map(|(k, v)| format!("{}: {}", quote(k), quote(v))).collect();
    format!("{{{}}}", body.join(", "))
}

/// Writes a program back as script text, one call per line.
pub fn render_logic_script(program: &AdapterProgram) -> String {
    let mut out = String::new();
    for call in &program.calls {
        match call {
            Call::ModelDevice(d) => {
                let states: Vec<String> = d.states.iter().map(|s| quote(s)).collect();
                out.push_str(&format!(
                    "model_device({}, [{}], type={}, location={}",
                    quote(&d.id),
                    states.join(", "),
                    quote(&d.device_type),
                    quote(&d.location)
                ));
                if let Some(sensor) = &d.sensor {
                    let readings: Vec<String> =
                        sensor.readings.iter().map(|(s, b)| format!("{}: {b}", quote(s))).collect();
                    out.push_str(&format!(", sensor_of={}, readings={{{}}}", quote(&sensor.variable), readings.join(", ")));
                }
                out.push_str(")\n");
            }
            Call::ModelStateTransition(t) => {
                out.push_str(&format!("model_state_transition({}, {}, {}", quote(&t.rule), state_map(&t.pre), state_map(&t.post)));
                if !t.condition.is_empty() {
                    out.push_str(&format!(", {}", quote(&format_trigger(&t.condition))));
                }
                out.push_str(")\n");
            }
            Call::DefineInitialState(assignments) => {
                let body: Vec<String> = assignments
                    .iter()
                    .map(|(k, v)| {
                        let v = match v {
                            InitialValue::State(s) => quote(s),
                            InitialValue::Number(q) => q.to_string(),
                            InitialValue::Clock(m) => quote(&format_clock(*m)),
                        };
                        format!("{}: {v}", quote(k))
                    })
                    .collect();
                out.push_str(&format!("define_initial_state({{{}}})\n", body.join(", ")));
            }
        }
    }
    out
}
