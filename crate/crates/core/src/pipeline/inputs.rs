//! Reading input files with path-prefixed, positioned diagnostics.

use std::fs;
use std::path::{Path, PathBuf};

use crate::io::{parse_conflict_spec, parse_device_list, parse_overrides, parse_rule_list, serialize_conflict_spec};
use crate::io::{ConflictSpec, StateOverrides};
use crate::model::{AutomationRule, DeviceSpec};

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct InputError {
    pub path: String,
    pub message: String,
}

impl InputError {
    pub fn new(path: &Path, message: impl ToString) -> Self {
        InputError { path: path.display().to_string(), message: message.to_string() }
    }
}

pub fn read_text(path: &Path) -> Result<String, InputError> {
    fs::read_to_string(path).map_err(|e| InputError::new(path, e))
}

/// A parsed document together with the exact text it came from.
#[derive(Clone, Debug)]
pub struct Loaded<T> {
    pub value: T,
    pub text: String,
}

pub fn load_devices(path: &Path) -> Result<Loaded<Vec<DeviceSpec>>, InputError> {
    let text = read_text(path)?;
    let value = parse_device_list(&text).map_err(|e| InputError::new(path, e))?;
    Ok(Loaded { value, text })
}

pub fn load_rules(path: &Path) -> Result<Loaded<Vec<AutomationRule>>, InputError> {
    let text = read_text(path)?;
    let value = parse_rule_list(&text).map_err(|e| InputError::new(path, e))?;
    Ok(Loaded { value, text })
}

/// The conflict spec at `path`, or the default one. A depth bound given on
/// the command line replaces the file's; `text` is always the canonical
/// serialization of the result so a ledger can rebuild it exactly.
pub fn load_spec(path: Option<&Path>, depth_bound: Option<usize>) -> Result<Loaded<ConflictSpec>, InputError> {
    let mut spec = match path {
        Some(p) => parse_conflict_spec(&read_text(p)?).map_err(|e| InputError::new(p, e))?,
        None => ConflictSpec::default(),
    };
    if let Some(d) = depth_bound {
        spec.depth_bound = d;
    }
    let text = serialize_conflict_spec(&spec);
    Ok(Loaded { value: spec, text })
}

pub fn load_overrides(path: Option<&Path>) -> Result<Loaded<StateOverrides>, InputError> {
    match path {
        Some(p) => {
            let text = read_text(p)?;
            let value = parse_overrides(&text).map_err(|e| InputError::new(p, e))?;
            Ok(Loaded { value, text })
        }
        None => Ok(Loaded { value: StateOverrides::default(), text: "{}\n".into() }),
    }
}

/// Every regular file directly inside `dir`, sorted by name, as
/// `(file name, contents)`.
pub fn load_manuals(dir: &Path) -> Result<Vec<(String, String)>, InputError> {
    let entries = fs::read_dir(dir).map_err(|e| InputError::new(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    paths.sort();
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            Ok((name, read_text(&p)?))
        })
        .collect()
}
