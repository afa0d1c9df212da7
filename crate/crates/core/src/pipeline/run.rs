//! The generate, verify, optimize loop and its replay.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::inputs::{load_manuals, load_overrides, load_rules, load_spec, read_text, InputError};
use super::ledger::{iteration_dir, LedgerError, LedgerReader, RunLedger};
use crate::detect::{detect_all, ConflictKind, ConflictReport, ReportDocument};
use crate::engine::build_system;
use crate::io::{
    parse_conflict_spec, parse_device_list, parse_incomplete_device_list, parse_overrides, parse_rule_list,
    serialize_device_list, serialize_rule_list, ConflictSpec, StateOverrides,
};
use crate::llm::{
    build_prompt_code_generation, build_prompt_device_extraction, build_prompt_rule_generation,
    build_prompt_rule_optimization, parse_devices_response, parse_logic_code_response, parse_rules_response, request,
    Backend, BackendConfig, Exchange, GatewayError, Prompt, ResponseError,
};
use crate::maude::{
    lower_system_to_maude, lower_to_maude, maude_binary, render_logic_script, render_maude, run_searches, SearchResult,
};
use crate::model::{format_clock, AutomationRule, DeviceSpec, TriggerAtom};

pub const DEFAULT_MAX_ITERATIONS: usize = 3;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// A complete device list, or an incomplete one when `manuals` is set.
    pub devices: PathBuf,
    pub manuals: Option<PathBuf>,
    pub preferences: Option<PathBuf>,
    pub conflict_spec: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    /// Starting rules; skips generation.
    pub rules: Option<PathBuf>,
    pub backend: BackendConfig,
    pub max_iterations: usize,
    pub depth_bound: Option<usize>,
    pub maude_check: bool,
    /// Adds the conflict definitions to the generation prompt.
    pub conflict_context: bool,
    /// Asks the backend for logic code each iteration and lowers it too.
    pub logic_code: bool,
    /// Parent directory of run ledgers.
    pub out: PathBuf,
}

impl PipelineConfig {
    pub fn new(devices: impl Into<PathBuf>, out: impl Into<PathBuf>) -> Self {
        PipelineConfig {
            devices: devices.into(),
            manuals: None,
            preferences: None,
            conflict_spec: None,
            overrides: None,
            rules: None,
            backend: BackendConfig::default(),
            max_iterations: DEFAULT_MAX_ITERATIONS,
            depth_bound: None,
            maude_check: false,
            conflict_context: true,
            logic_code: true,
            out: out.into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    ConflictFree,
    /// Conflicts remain after the last allowed iteration.
    Bounded,
    /// A backend error or an answer that stayed unusable.
    Failed,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub status: RunStatus,
    pub iterations: usize,
    pub llm_calls: usize,
    pub rule_count: usize,
    pub conflict_count: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug)]
pub struct PipelineRun {
    pub summary: RunSummary,
    pub dir: PathBuf,
    pub rules: Vec<AutomationRule>,
    pub reports: Vec<ConflictReport>,
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Input(#[from] InputError),
    #[error("max_iterations must be at least 1")]
    NoIterations,
    #[error(transparent)]
    Ledger(#[from] LedgerError),
}

/// One line per rule: `id: if <conditions>, then <actions>.`
pub fn describe_rules(rules: &[AutomationRule]) -> String {
    let mut out = String::new();
    for r in rules {
        let conds: Vec<String> = r
            .trigger
            .iter()
            .map(|a| match a {
                TriggerAtom::State { device, state } => format!("{device} is {state}"),
                TriggerAtom::Env { variable, cmp, value } => format!("{variable} {cmp} {value}"),
                TriggerAtom::Time { minutes } => format!("it is {}", format_clock(*minutes)),
            })
            .collect();
        let acts: Vec<String> =
            r.actions.iter().map(|a| format!("{} {}", a.action.replace('_', " "), a.device)).collect();
        out.push_str(&format!("{}: if {}, then {}.\n", r.id, conds.join(" and "), acts.join(" and ")));
    }
    out
}

struct Context {
    devices: Vec<DeviceSpec>,
    spec: ConflictSpec,
    overrides: StateOverrides,
}

impl Context {
    fn rules_parser(&self) -> impl Fn(&str) -> Result<Vec<AutomationRule>, ResponseError> + '_ {
        move |text| {
            let rules = parse_rules_response(text)?;
            build_system(&self.devices, &rules, &self.spec, &self.overrides)
                .map_err(|e| ResponseError::Invalid(e.to_string()))?;
            Ok(rules)
        }
    }
}

/// Counts requests and records each conversation under `dir`.
struct Asker<'a> {
    backend: &'a dyn Backend,
    calls: usize,
}

impl Asker<'_> {
    fn ask<T>(
        &mut self,
        ledger: &mut RunLedger,
        dir: &str,
        prompt: &Prompt,
        parse: impl Fn(&str) -> Result<T, ResponseError>,
    ) -> Result<Result<T, GatewayError>, LedgerError> {
        let mut log: Vec<Exchange> = Vec::new();
        let result = request(self.backend, prompt, parse, &mut log);
        self.calls += log.len();
        ledger.write(&format!("{dir}/prompt.txt"), prompt.render())?;
        ledger.write_json(&format!("{dir}/exchanges.json"), &log)?;
        if let Some(last) = log.last().and_then(|e| e.response.as_ref()) {
            ledger.write(&format!("{dir}/response.txt"), last)?;
        }
        Ok(result)
    }
}

/// Runs the loop: generate (or take `--rules`), verify, and optimize until
/// no conflict remains or `max_iterations` is reached. Everything lands in
/// a fresh ledger under `config.out`.
pub fn run_pipeline(config: &PipelineConfig, backend: &dyn Backend) -> Result<PipelineRun, PipelineError> {
    if config.max_iterations == 0 {
        return Err(PipelineError::NoIterations);
    }
    let spec = load_spec(config.conflict_spec.as_deref(), config.depth_bound)?;
    let overrides = load_overrides(config.overrides.as_deref())?;
    let preferences = config.preferences.as_deref().map(read_text).transpose()?;
    let seed = config.rules.as_deref().map(load_rules).transpose()?;
    let raw_devices = read_text(&config.devices)?;
    let manuals = config.manuals.as_deref().map(load_manuals).transpose()?;
    let complete_devices = match &manuals {
        Some(_) => {
            parse_incomplete_device_list(&raw_devices).map_err(|e| InputError::new(&config.devices, e))?;
            None
        }
        None => Some(parse_device_list(&raw_devices).map_err(|e| InputError::new(&config.devices, e))?),
    };

    let mut ledger = RunLedger::create(&config.out)?;
    ledger.write_json("config.json", config)?;
    ledger.write("inputs/devices.json", &raw_devices)?;
    for (name, text) in manuals.iter().flatten() {
        ledger.write(&format!("inputs/manuals/{name}"), text)?;
    }
    if let Some(p) = &preferences {
        ledger.write("inputs/preferences.txt", p)?;
    }
    if let Some(s) = &seed {
        ledger.write("inputs/rules.json", &s.text)?;
    }
    ledger.write("resolved/conflict_spec.json", &spec.text)?;
    ledger.write("resolved/overrides.json", &overrides.text)?;

    let mut cx = Context {
        devices: complete_devices.clone().unwrap_or_default(),
        spec: spec.value,
        overrides: overrides.value,
    };
    let mut asker = Asker { backend, calls: 0 };
    let failed = |calls: usize, ledger: RunLedger, error: String| -> Result<PipelineRun, PipelineError> {
        finish(ledger, RunStatus::Failed, calls, Vec::new(), Vec::new(), None, Some(error))
    };

    if let (None, Some(manuals)) = (&complete_devices, &manuals) {
        let incomplete = parse_incomplete_device_list(&raw_devices).expect("checked above");
        let prompt = match build_prompt_device_extraction(&incomplete, manuals) {
            Ok(p) => p,
            Err(e) => return failed(asker.calls, ledger, e.to_string()),
        };
        let parse = |t: &str| parse_devices_response(t, false);
        match asker.ask(&mut ledger, "extraction", &prompt, parse)? {
            Ok(devices) => cx.devices = devices,
            Err(e) => {
                ledger.write("extraction/error.txt", e.to_string())?;
                return failed(asker.calls, ledger, format!("device extraction: {e}"));
            }
        }
    }
    ledger.write("resolved/devices.json", serialize_device_list(&cx.devices))?;

    let mut rules: Vec<AutomationRule> = Vec::new();
    let mut reports: Vec<ConflictReport> = Vec::new();
    let mut note = None;
    while ledger.iterations() < config.max_iterations {
        let n = ledger.begin_iteration();
        let dir = iteration_dir(n);
        let next = if n == 1 {
            match &seed {
                Some(s) => {
                    ledger.write(&format!("{dir}/source.txt"), "rules supplied as input\n")?;
                    match build_system(&cx.devices, &s.value, &cx.spec, &cx.overrides) {
                        Ok(_) => Ok(s.value.clone()),
                        Err(e) => Err(format!("supplied rules: {e}")),
                    }
                }
                None => match build_prompt_rule_generation(&cx.devices, preferences.as_deref(), config.conflict_context) {
                    Ok(prompt) => asker
                        .ask(&mut ledger, &format!("{dir}/generation"), &prompt, cx.rules_parser())?
                        .map_err(|e| e.to_string()),
                    Err(e) => Err(e.to_string()),
                },
            }
        } else {
            let prompt = build_prompt_rule_optimization(&rules, &reports).expect("conflicts are present");
            asker
                .ask(&mut ledger, &format!("{dir}/optimization"), &prompt, cx.rules_parser())?
                .map_err(|e| e.to_string())
        };
        let next = match next {
            Ok(r) => r,
            Err(e) => {
                ledger.write(&format!("{dir}/error.txt"), &e)?;
                return failed(asker.calls, ledger, format!("iteration {n}: {e}"));
            }
        };
        let unchanged = n > 1 && next == rules;
        rules = next;
        let sys = build_system(&cx.devices, &rules, &cx.spec, &cx.overrides).expect("validated by the parser");
        reports = detect_all(&sys);
        ledger.write(&format!("{dir}/rules.json"), serialize_rule_list(&rules))?;
        ledger.write(&format!("{dir}/rules.txt"), describe_rules(&rules))?;
        ledger.write(&format!("{dir}/report.json"), ReportDocument::new(reports.clone(), sys.depth_bound()).to_json())?;
        let source = render_maude(&lower_system_to_maude(&sys));
        ledger.write(&format!("{dir}/system.maude"), &source)?;

        if config.logic_code && !rules.is_empty() {
            if let Err(e) = logic_code_step(&cx, &mut asker, &mut ledger, &dir, &rules, &reports)? {
                if e.backend {
                    ledger.write(&format!("{dir}/error.txt"), &e.message)?;
                    return failed(asker.calls, ledger, format!("iteration {n}: {}", e.message));
                }
                ledger.write(&format!("{dir}/logic/error.txt"), &e.message)?;
            }
        }
        if config.maude_check {
            ledger.write_json(&format!("{dir}/maude_check.json"), &maude_check(&source, &reports))?;
        }
        if reports.is_empty() {
            break;
        }
        if unchanged {
            note = Some(format!("iteration {n} returned the previous rules unchanged"));
            break;
        }
    }
    let status = if reports.is_empty() { RunStatus::ConflictFree } else { RunStatus::Bounded };
    finish(ledger, status, asker.calls, rules, reports, note, None)
}

struct StepError {
    backend: bool,
    message: String,
}

/// Prompt C: the backend writes the logic code, which is lowered on its own
/// and must reach the same verdict as the native detector.
fn logic_code_step(
    cx: &Context,
    asker: &mut Asker,
    ledger: &mut RunLedger,
    dir: &str,
    rules: &[AutomationRule],
    reports: &[ConflictReport],
) -> Result<Result<(), StepError>, LedgerError> {
    let prompt = match build_prompt_code_generation(&cx.devices, rules) {
        Ok(p) => p,
        Err(e) => return Ok(Err(StepError { backend: false, message: e.to_string() })),
    };
    let parse = |t: &str| {
        let program = parse_logic_code_response(t)?;
        let sys = program.to_system(&cx.spec).map_err(|e| ResponseError::Invalid(e.to_string()))?;
        Ok((program, sys))
    };
    let (program, sys) = match asker.ask(ledger, &format!("{dir}/logic"), &prompt, parse)? {
        Ok(v) => v,
        Err(e) => {
            let backend = matches!(e, GatewayError::Backend(_));
            return Ok(Err(StepError { backend, message: format!("logic code: {e}") }));
        }
    };
    ledger.write(&format!("{dir}/logic/logic_code.txt"), render_logic_script(&program))?;
    let module = lower_to_maude(&program, &cx.spec).expect("the program built a system");
    ledger.write(&format!("{dir}/logic/logic.maude"), render_maude(&module))?;
    let agrees = detect_all(&sys) == reports;
    ledger.write_json(&format!("{dir}/logic/agreement.json"), &serde_json::json!({"same_verdict": agrees}))?;
    Ok(Ok(()))
}

fn maude_check(source: &str, reports: &[ConflictReport]) -> serde_json::Value {
    let Some(bin) = maude_binary() else {
        return serde_json::json!({"skipped": "no maude interpreter found"});
    };
    let expected: Vec<bool> = ConflictKind::ALL
        .iter()
        .map(|k| reports.iter().any(|r| r.kind == *k))
        .collect();
    match run_searches(&bin, source, 4) {
        Ok(results) => {
            let found: Vec<bool> = results.iter().map(|r| *r == SearchResult::Solution).collect();
            serde_json::json!({"binary": bin.display().to_string(), "solutions": found, "agrees": found == expected})
        }
        Err(e) => serde_json::json!({"binary": bin.display().to_string(), "error": e.to_string()}),
    }
}

fn finish(
    mut ledger: RunLedger,
    status: RunStatus,
    llm_calls: usize,
    rules: Vec<AutomationRule>,
    reports: Vec<ConflictReport>,
    note: Option<String>,
    error: Option<String>,
) -> Result<PipelineRun, PipelineError> {
    let summary = RunSummary {
        run_id: ledger.run_id().to_string(),
        status,
        iterations: ledger.iterations(),
        llm_calls,
        rule_count: rules.len(),
        conflict_count: reports.len(),
        note,
        error,
    };
    ledger.write_json("final/verdict.json", &summary)?;
    if status != RunStatus::Failed {
        ledger.write("final/rules.json", serialize_rule_list(&rules))?;
        ledger.write("final/rules.txt", describe_rules(&rules))?;
    }
    let dir = ledger.finish()?;
    Ok(PipelineRun { summary, dir, rules, reports })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IterationReplay {
    pub iteration: usize,
    /// The recomputed report equals the stored one byte for byte.
    pub exact: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReplayReport {
    pub iterations: Vec<IterationReplay>,
    pub tampered: Vec<String>,
}

impl ReplayReport {
    pub fn is_exact(&self) -> bool {
        self.tampered.is_empty() && self.iterations.iter().all(|i| i.exact)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error(transparent)]
    Ledger(#[from] LedgerError),
    #[error("{file}: {message}")]
    Stored { file: String, message: String },
}

/// Re-runs detection on the stored inputs of every iteration and compares
/// the reports with the stored ones.
pub fn replay_ledger(dir: &Path) -> Result<ReplayReport, ReplayError> {
    let reader = LedgerReader::open(dir)?;
    let stored = |file: &str, message: String| ReplayError::Stored { file: file.to_string(), message };
    let devices = parse_device_list(&reader.read_string("resolved/devices.json")?)
        .map_err(|e| stored("resolved/devices.json", e.to_string()))?;
    let spec = parse_conflict_spec(&reader.read_string("resolved/conflict_spec.json")?)
        .map_err(|e| stored("resolved/conflict_spec.json", e.to_string()))?;
    let overrides = parse_overrides(&reader.read_string("resolved/overrides.json")?)
        .map_err(|e| stored("resolved/overrides.json", e.to_string()))?;
    let mut iterations = Vec::new();
    for n in 1..=reader.manifest.iterations {
        let rules_file = format!("{}/rules.json", iteration_dir(n));
        let report_file = format!("{}/report.json", iteration_dir(n));
        if !reader.contains(&rules_file) {
            continue;
        }
        let rules = parse_rule_list(&reader.read_string(&rules_file)?).map_err(|e| stored(&rules_file, e.to_string()))?;
        let sys = build_system(&devices, &rules, &spec, &overrides).map_err(|e| stored(&rules_file, e.to_string()))?;
        let recomputed = ReportDocument::new(detect_all(&sys), sys.depth_bound()).to_json();
        // An edited report is a mismatch, not a reason to stop; the manifest
        // check below names it.
        let on_disk = fs::read(dir.join(&report_file)).unwrap_or_default();
        iterations.push(IterationReplay { iteration: n, exact: on_disk == recomputed.as_bytes() });
    }
    Ok(ReplayReport { iterations, tampered: reader.verify() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Comparator, RuleAction};

    #[test]
    fn rules_read_as_sentences() {
        let r = AutomationRule::new(
            "r1",
            vec![TriggerAtom::state("ac1", "off"), TriggerAtom::env("temperature", Comparator::Gt, 27), TriggerAtom::time(7, 0)],
            vec![RuleAction::new("ac1", "turn_on")],
        );
        assert_eq!(describe_rules(&[r]), "r1: if ac1 is off and temperature > 27 and it is 07:00, then turn on ac1.\n");
    }

    #[test]
    fn zero_iterations_is_rejected() {
        let mut c = PipelineConfig::new("d.json", "out");
        c.max_iterations = 0;
        assert!(matches!(run_pipeline(&c, &crate::llm::MockBackend), Err(PipelineError::NoIterations)));
    }
}
