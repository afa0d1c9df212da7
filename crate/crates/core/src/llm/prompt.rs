//! The four prompts, rendered from the template files in `templates/`.
//!
//! A template is a sequence of `[section]` headers: `instruction`, one
//! `context` per block (`context <tag>` marks an optional block), and
//! `output_indicator`. `{name}` placeholders are filled at build time.

use serde::{Deserialize, Serialize};

use crate::detect::ConflictReport;
use crate::io::{serialize_device_list, serialize_incomplete_device_list, serialize_rule_list, PartialDevice};
use crate::model::{AutomationRule, DeviceSpec};

const DEVICE_EXTRACTION: &str = include_str!("../../templates/device_extraction.v1.txt");
const RULE_GENERATION: &str = include_str!("../../templates/rule_generation.v1.txt");
const CODE_GENERATION: &str = include_str!("../../templates/code_generation.v1.txt");
const RULE_OPTIMIZATION: &str = include_str!("../../templates/rule_optimization.v1.txt");
const LOGIC_CODE_TEMPLATE: &str = include_str!("../../templates/logic_code_template.v1.txt");

pub const TEMPLATE_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PromptKind {
    DeviceExtraction,
    RuleGeneration,
    CodeGeneration,
    RuleOptimization,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attachment {
    /// Placeholder name, e.g. `device_list`.
    pub name: String,
    /// Distinguishes several attachments of one name, such as manuals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    pub content: String,
}

impl Attachment {
    pub fn new(name: &str, content: impl Into<String>) -> Self {
        Attachment { name: name.to_string(), label: None, content: content.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prompt {
    pub kind: PromptKind,
    pub instruction: String,
    pub context: Vec<String>,
    pub input_data: Vec<Attachment>,
    pub output_indicator: String,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PromptError {
    #[error("the incomplete device list is empty")]
    NoDevices,
    #[error("the device list is empty")]
    EmptyDeviceList,
    #[error("the rule list is empty; nothing to verify")]
    EmptyRuleList,
    #[error("no conflicts to optimize")]
    NoConflicts,
}

struct Template {
    instruction: String,
    context: Vec<(Option<String>, String)>,
    output_indicator: String,
}

fn parse_template(text: &str) -> Template {
    let mut sections: Vec<(String, String)> = Vec::new();
    for line in text.lines() {
        if let Some(header) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            sections.push((header.to_string(), String::new()));
        } else if let Some((_, body)) = sections.last_mut() {
            body.push_str(line);
            body.push('\n');
        }
    }
    let mut t = Template { instruction: String::new(), context: Vec::new(), output_indicator: String::new() };
    for (header, body) in sections {
        let body = body.trim_end().to_string();
        match header.split_once(' ') {
            None if header == "instruction" => t.instruction = body,
            None if header == "output_indicator" => t.output_indicator = body,
            None if header == "context" => t.context.push((None, body)),
            Some(("context", tag)) => t.context.push((Some(tag.to_string()), body)),
            _ => panic!("unknown template section `{header}`"),
        }
    }
    t
}

impl Template {
    fn build(&self, kind: PromptKind, tags: &[&str], fills: &[(&str, &str)], input_data: Vec<Attachment>) -> Prompt {
        let fill = |s: &str| {
            fills.iter().fold(s.to_string(), |acc, (k, v)| acc.replace(&format!("{{{k}}}"), v.trim_end()))
        };
        Prompt {
            kind,
            instruction: fill(&self.instruction),
            context: self
                .context
                .iter()
                .filter(|(tag, _)| tag.as_deref().is_none_or(|t| tags.contains(&t)))
                .map(|(_, body)| fill(body))
                .collect(),
            input_data,
            output_indicator: fill(&self.output_indicator),
        }
    }
}

/// Prompt A: complete an id/type/location list with states and actions.
pub fn build_prompt_device_extraction(
    incomplete: &[PartialDevice],
    manuals: &[(String, String)],
) -> Result<Prompt, PromptError> {
    if incomplete.is_empty() {
        return Err(PromptError::NoDevices);
    }
    let mut input = vec![Attachment::new("incomplete_device_list", serialize_incomplete_device_list(incomplete))];
    for (label, text) in manuals {
        input.push(Attachment { name: "user_manual".into(), label: Some(label.clone()), content: text.clone() });
    }
    Ok(parse_template(DEVICE_EXTRACTION).build(PromptKind::DeviceExtraction, &[], &[], input))
}

/// Prompt B. The conflict definitions are included iff `with_conflicts`.
pub fn build_prompt_rule_generation(
    devices: &[DeviceSpec],
    preferences: Option<&str>,
    with_conflicts: bool,
) -> Result<Prompt, PromptError> {
    if devices.is_empty() {
        return Err(PromptError::EmptyDeviceList);
    }
    let mut input = vec![Attachment::new("device_list", serialize_device_list(devices))];
    if let Some(p) = preferences {
        input.push(Attachment::new("user_preference", p));
    }
    let tags: &[&str] = if with_conflicts { &["conflicts"] } else { &[] };
    Ok(parse_template(RULE_GENERATION).build(PromptKind::RuleGeneration, tags, &[], input))
}

/// Prompt C: translate devices and rules into the three-call logic script.
pub fn build_prompt_code_generation(devices: &[DeviceSpec], rules: &[AutomationRule]) -> Result<Prompt, PromptError> {
    if devices.is_empty() {
        return Err(PromptError::EmptyDeviceList);
    }
    if rules.is_empty() {
        return Err(PromptError::EmptyRuleList);
    }
    let input = vec![
        Attachment::new("device_list", serialize_device_list(devices)),
        Attachment::new("rule_list", serialize_rule_list(rules)),
    ];
    Ok(parse_template(CODE_GENERATION).build(
        PromptKind::CodeGeneration,
        &[],
        &[("code_template", LOGIC_CODE_TEMPLATE)],
        input,
    ))
}

/// The conflict list as it appears in Prompt D: reports without witnesses.
pub fn serialize_conflict_information(conflicts: &[ConflictReport]) -> String {
    let stripped: Vec<ConflictReport> =
        conflicts.iter().map(|c| ConflictReport { witness: None, ..c.clone() }).collect();
    let mut text = serde_json::to_string_pretty(&stripped).expect("reports serialize");
    text.push('\n');
    text
}

/// Prompt D: repair `rules` so the listed conflicts disappear.
pub fn build_prompt_rule_optimization(
    rules: &[AutomationRule],
    conflicts: &[ConflictReport],
) -> Result<Prompt, PromptError> {
    if conflicts.is_empty() {
        return Err(PromptError::NoConflicts);
    }
    let info = serialize_conflict_information(conflicts);
    Ok(parse_template(RULE_OPTIMIZATION).build(
        PromptKind::RuleOptimization,
        &[],
        &[("conflict_information", &info)],
        vec![Attachment::new("rule_list", serialize_rule_list(rules))],
    ))
}

impl Prompt {
    pub fn attachment(&self, name: &str) -> Option<&Attachment> {
        self.input_data.iter().find(|a| a.name == name)
    }

    pub fn attachments<'p>(&'p self, name: &'p str) -> impl Iterator<Item = &'p Attachment> {
        self.input_data.iter().filter(move |a| a.name == name)
    }

    /// The conflict list embedded in a Prompt D context.
    pub fn conflict_information(&self) -> Option<Vec<ConflictReport>> {
        let block = self.context.first()?;
        let body = block.strip_prefix("<conflict_information>\n")?.strip_suffix("\n</conflict_information>")?;
        serde_json::from_str(body).ok()
    }

    /// A follow-up that repeats the prompt and quotes why the last answer
    /// could not be used.
    pub fn with_repair_note(&self, error: &str) -> Prompt {
        let mut p = self.clone();
        p.context.push(format!(
            "The previous answer could not be used:\n{error}\nAnswer again, strictly in the output format below."
        ));
        p
    }

    /// The text sent to a model.
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str("Instruction:\n");
        out.push_str(&self.instruction);
        out.push_str("\n\nContext:\n");
        out.push_str(&self.context.join("\n\n"));
        out.push_str("\n\nInput data:\n");
        for (i, a) in self.input_data.iter().enumerate() {
            if i > 0 {
                out.push('\n');
            }
            match &a.label {
                Some(label) => out.push_str(&format!("<{} name=\"{}\">\n", a.name, label)),
                None => out.push_str(&format!("<{}>\n", a.name)),
            }
            out.push_str(a.content.trim_end());
            out.push_str(&format!("\n</{}>\n", a.name));
        }
        out.push_str("\nOutput indicator:\n");
        out.push_str(&self.output_indicator);
        out.push('\n');
        out
    }
}
