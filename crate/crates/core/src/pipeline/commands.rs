//! The CLI subcommands as library calls. Each returns what to print and the
//! process exit status; nothing here touches `std::process`.

use std::fs;
use std::path::{Path, PathBuf};

use super::inputs::{load_devices, load_manuals, load_overrides, load_rules, load_spec, read_text, InputError};
use super::run::{describe_rules, replay_ledger, run_pipeline, PipelineConfig, PipelineError, RunStatus};
use crate::detect::{detect_all, ReportDocument};
use crate::engine::{build_system, TransitionSystem};
use crate::io::{parse_incomplete_device_list, serialize_device_list, serialize_rule_list};
use crate::llm::{
    build_prompt_device_extraction, build_prompt_rule_generation, build_prompt_rule_optimization,
    parse_devices_response, parse_rules_response, request, Backend, GatewayError, ResponseError,
};
use crate::maude::{lower_system_to_maude, render_maude};
use crate::model::{rule_result_list, AutomationRule};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExitStatus {
    NoConflict = 0,
    Conflicts = 1,
    Usage = 2,
    Backend = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommandOutput {
    pub status: ExitStatus,
    /// The primary document when it was not written to a file.
    pub stdout: String,
    /// Diagnostics and one-line summaries.
    pub messages: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{message}")]
pub struct CommandError {
    pub status: ExitStatus,
    pub message: String,
}

impl CommandError {
    fn usage(message: impl ToString) -> Self {
        CommandError { status: ExitStatus::Usage, message: message.to_string() }
    }

    fn backend(message: impl ToString) -> Self {
        CommandError { status: ExitStatus::Backend, message: message.to_string() }
    }
}

impl From<InputError> for CommandError {
    fn from(e: InputError) -> Self {
        CommandError::usage(e)
    }
}

impl From<GatewayError> for CommandError {
    fn from(e: GatewayError) -> Self {
        CommandError::backend(e)
    }
}

/// The files describing one home and its rules.
#[derive(Clone, Debug, Default)]
pub struct SystemArgs {
    pub devices: PathBuf,
    pub rules: PathBuf,
    pub conflict_spec: Option<PathBuf>,
    pub overrides: Option<PathBuf>,
    pub depth_bound: Option<usize>,
}

impl SystemArgs {
    fn load(&self) -> Result<TransitionSystem, CommandError> {
        let devices = load_devices(&self.devices)?;
        let rules = load_rules(&self.rules)?;
        let spec = load_spec(self.conflict_spec.as_deref(), self.depth_bound)?;
        let overrides = load_overrides(self.overrides.as_deref())?;
        build_system(&devices.value, &rules.value, &spec.value, &overrides.value)
            .map_err(|e| CommandError::usage(format!("{}: {e}", self.rules.display())))
    }
}

fn write_or_return(out: Option<&Path>, text: String) -> Result<String, CommandError> {
    match out {
        Some(p) => {
            fs::write(p, &text).map_err(|e| CommandError::usage(format!("{}: {e}", p.display())))?;
            Ok(String::new())
        }
        None => Ok(text),
    }
}

/// `rules.json` next to `rules.txt`, when writing to a file.
fn write_rules(out: Option<&Path>, rules: &[AutomationRule]) -> Result<String, CommandError> {
    if let Some(p) = out {
        let text_path = p.with_extension("txt");
        fs::write(&text_path, describe_rules(rules))
            .map_err(|e| CommandError::usage(format!("{}: {e}", text_path.display())))?;
    }
    write_or_return(out, serialize_rule_list(rules))
}

fn report_status(doc: &ReportDocument) -> ExitStatus {
    if doc.conflicts.is_empty() {
        ExitStatus::NoConflict
    } else {
        ExitStatus::Conflicts
    }
}

fn summary(doc: &ReportDocument) -> String {
    match doc.conflicts.len() {
        0 => "no conflict".to_string(),
        1 => "1 conflict".to_string(),
        n => format!("{n} conflicts"),
    }
}

/// Runs commands against one backend. Offline commands never call it.
pub struct Session<'a> {
    pub backend: &'a dyn Backend,
}

impl Session<'_> {
    pub fn verify(&self, args: &SystemArgs, out: Option<&Path>) -> Result<CommandOutput, CommandError> {
        let sys = args.load()?;
        let doc = ReportDocument::new(detect_all(&sys), sys.depth_bound());
        let stdout = write_or_return(out, doc.to_json())?;
        Ok(CommandOutput { status: report_status(&doc), stdout, messages: vec![summary(&doc)] })
    }

    pub fn emit_maude(&self, args: &SystemArgs, out: &Path) -> Result<CommandOutput, CommandError> {
        let sys = args.load()?;
        let mut messages = Vec::new();
        if sys.rules().is_empty() {
            messages.push("warning: the rule list is empty; the module has no transition rules".to_string());
        }
        write_or_return(Some(out), render_maude(&lower_system_to_maude(&sys)))?;
        messages.push(format!("wrote {}", out.display()));
        Ok(CommandOutput { status: ExitStatus::NoConflict, stdout: String::new(), messages })
    }

    pub fn extract(&self, incomplete: &Path, manuals: &Path, out: Option<&Path>) -> Result<CommandOutput, CommandError> {
        let text = read_text(incomplete)?;
        let list = parse_incomplete_device_list(&text).map_err(|e| InputError::new(incomplete, e))?;
        if !manuals.is_dir() {
            return Err(CommandError::usage(format!("{}: not a directory", manuals.display())));
        }
        let manuals = load_manuals(manuals)?;
        let prompt = build_prompt_device_extraction(&list, &manuals).map_err(CommandError::usage)?;
        let devices = request(self.backend, &prompt, |t| parse_devices_response(t, false), &mut Vec::new())?;
        let stdout = write_or_return(out, serialize_device_list(&devices))?;
        Ok(CommandOutput { status: ExitStatus::NoConflict, stdout, messages: vec![format!("{} devices", devices.len())] })
    }

    pub fn generate(
        &self,
        devices: &Path,
        preferences: Option<&Path>,
        conflict_context: bool,
        out: Option<&Path>,
    ) -> Result<CommandOutput, CommandError> {
        let devices = load_devices(devices)?.value;
        let preferences = preferences.map(read_text).transpose()?;
        let prompt = build_prompt_rule_generation(&devices, preferences.as_deref(), conflict_context)
            .map_err(CommandError::usage)?;
        let parse = |t: &str| {
            let rules = parse_rules_response(t)?;
            for r in &rules {
                rule_result_list(r, &devices).map_err(|e| ResponseError::Invalid(format!("rule `{}`: {e}", r.id)))?;
            }
            Ok(rules)
        };
        let rules = request(self.backend, &prompt, parse, &mut Vec::new())?;
        let stdout = write_rules(out, &rules)?;
        Ok(CommandOutput { status: ExitStatus::NoConflict, stdout, messages: vec![format!("{} rules", rules.len())] })
    }

    /// One optimization round: detect, ask for repaired rules, detect again.
    pub fn optimize(&self, args: &SystemArgs, out: Option<&Path>) -> Result<CommandOutput, CommandError> {
        let sys = args.load()?;
        let reports = detect_all(&sys);
        if reports.is_empty() {
            let stdout = write_rules(out, sys.rules())?;
            return Ok(CommandOutput { status: ExitStatus::NoConflict, stdout, messages: vec!["no conflict".into()] });
        }
        let overrides = load_overrides(args.overrides.as_deref())?.value;
        let prompt = build_prompt_rule_optimization(sys.rules(), &reports).map_err(CommandError::usage)?;
        let parse = |t: &str| {
            let rules = parse_rules_response(t)?;
            let next = build_system(sys.devices(), &rules, sys.spec(), &overrides)
                .map_err(|e| ResponseError::Invalid(e.to_string()))?;
            Ok((rules, next))
        };
        let (rules, next) = request(self.backend, &prompt, parse, &mut Vec::new())?;
        let doc = ReportDocument::new(detect_all(&next), next.depth_bound());
        let stdout = write_rules(out, &rules)?;
        let messages = vec![format!("{} before, {} after", reports.len(), summary(&doc))];
        Ok(CommandOutput { status: report_status(&doc), stdout, messages })
    }

    pub fn pipeline(&self, config: &PipelineConfig) -> Result<CommandOutput, CommandError> {
        // Unreadable inputs, a zero bound and an unwritable ledger directory
        // are all caller mistakes.
        let run = run_pipeline(config, self.backend).map_err(|e: PipelineError| CommandError::usage(e))?;
        let status = match run.summary.status {
            RunStatus::ConflictFree => ExitStatus::NoConflict,
            RunStatus::Bounded => ExitStatus::Conflicts,
            RunStatus::Failed => ExitStatus::Backend,
        };
        let mut messages = vec![format!(
            "run {}: {:?} after {} iteration(s), {} LLM call(s)",
            run.summary.run_id, run.summary.status, run.summary.iterations, run.summary.llm_calls
        )];
        messages.extend(run.summary.error.iter().cloned());
        messages.extend(run.summary.note.iter().cloned());
        messages.push(format!("ledger {}", run.dir.display()));
        let stdout = serde_json::to_string_pretty(&run.summary).expect("summaries serialize") + "\n";
        Ok(CommandOutput { status, stdout, messages })
    }

    pub fn replay(&self, dir: &Path) -> Result<CommandOutput, CommandError> {
        let report = replay_ledger(dir).map_err(CommandError::usage)?;
        let mut messages: Vec<String> = report
            .iterations
            .iter()
            .map(|i| format!("iteration {}: {}", i.iteration, if i.exact { "identical" } else { "DIFFERENT" }))
            .collect();
        messages.extend(report.tampered.iter().map(|t| format!("changed since recorded: {t}")));
        let status = if report.is_exact() { ExitStatus::NoConflict } else { ExitStatus::Conflicts };
        Ok(CommandOutput { status, stdout: String::new(), messages })
    }
}
