//! Pulling domain objects out of model answers.
//!
//! Answers tend to wrap the payload in prose or code fences. In lenient mode
//! the first balanced JSON object anywhere in the text is used; strict mode
//! requires the whole answer (after trimming) to be that object.

use crate::io::{parse_device_list, parse_rule_list, ParseError};
use crate::maude::{parse_logic_script, AdapterProgram, ScriptError};
use crate::model::{AutomationRule, DeviceSpec};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ResponseError {
    #[error("no JSON object found in the answer")]
    NoJson,
    #[error("the answer has text around its JSON object")]
    NotStrict,
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("logic code: {0}")]
    Script(#[from] ScriptError),
    /// Parsed, but inconsistent with the devices or the conflict spec.
    #[error("{0}")]
    Invalid(String),
}

/// Byte range of the first balanced `{...}` that is not inside a string.
/// Braces inside string literals are skipped.
fn first_object_span(text: &str) -> Option<(usize, usize)> {
    let bytes = text.as_bytes();
    let mut search_from = 0;
    while let Some(offset) = text[search_from..].find('{') {
        let start = search_from + offset;
        let mut depth = 0usize;
        let mut in_string = false;
        let mut escaped = false;
        for (i, &b) in bytes.iter().enumerate().skip(start) {
            if in_string {
                match b {
                    _ if escaped => escaped = false,
                    b'\\' => escaped = true,
                    b'"' => in_string = false,
                    _ => {}
                }
                continue;
            }
            match b {
                b'"' => in_string = true,
                b'{' => depth += 1,
                b'}' => {
                    depth -= 1;
                    if depth == 0 {
                        let candidate = &text[start..=i];
                        if serde_json::from_str::<serde_json::Value>(candidate).is_ok() {
                            return Some((start, i + 1));
                        }
                        break;
                    }
                }
                _ => {}
            }
        }
        search_from = start + 1;
    }
    None
}

pub fn extract_json_object(text: &str, strict: bool) -> Result<&str, ResponseError> {
    if strict {
        let t = text.trim();
        return match first_object_span(t) {
            Some((0, end)) if end == t.len() => Ok(t),
            Some(_) => Err(ResponseError::NotStrict),
            None => Err(ResponseError::NoJson),
        };
    }
    let (start, end) = first_object_span(text).ok_or(ResponseError::NoJson)?;
    Ok(&text[start..end])
}

pub fn parse_rules_response(text: &str) -> Result<Vec<AutomationRule>, ResponseError> {
    parse_rules_response_with(text, false)
}

pub fn parse_rules_response_with(text: &str, strict: bool) -> Result<Vec<AutomationRule>, ResponseError> {
    Ok(parse_rule_list(extract_json_object(text, strict)?)?)
}

pub fn parse_devices_response(text: &str, strict: bool) -> Result<Vec<DeviceSpec>, ResponseError> {
    Ok(parse_device_list(extract_json_object(text, strict)?)?)
}

/// The logic script inside an answer: the body of the first code fence if
/// there is one, else the whole text.
pub fn parse_logic_code_response(text: &str) -> Result<AdapterProgram, ResponseError> {
    let body = match text.find("```") {
        Some(open) => {
            let after = &text[open + 3..];
            let body_start = after.find('\n').map_or(after.len(), |n| n + 1);
            let body = &after[body_start..];
            body.find("```").map_or(body, |close| &body[..close])
        }
        None => text,
    };
    Ok(parse_logic_script(body)?)
}
