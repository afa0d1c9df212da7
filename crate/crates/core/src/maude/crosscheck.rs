//! Running emitted modules through an installed Maude interpreter.
//!
//! Nothing here is needed for a verdict; it exists to compare the native
//! detector against Maude's own search when the interpreter is available.

use std::io::Write;
use std::path::PathBuf;
use std::process::{Command, Stdio};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SearchResult {
    Solution,
    NoSolution,
}

#[derive(Debug, thiserror::Error)]
pub enum CrossCheckError {
    #[error("failed to run maude: {0}")]
    Io(#[from] std::io::Error),
    #[error("maude printed {found} search results, expected {expected}")]
    Incomplete { found: usize, expected: usize },
}

/// The interpreter named by `MAUDE_BIN`, else `maude` if it is on `PATH`.
pub fn maude_binary() -> Option<PathBuf> {
    if let Some(bin) = std::env::var_os("MAUDE_BIN") {
        let path = PathBuf::from(bin);
        return path.is_file().then_some(path);
    }
    let path = std::env::var_os("PATH")?;
    std::env::split_paths(&path).map(|dir| dir.join("maude")).find(|p| p.is_file())
}

/// Reads search outcomes in order from interpreter output: each `search`
/// echo is followed by either `Solution 1` or `No solution.`.
pub fn parse_search_output(output: &str) -> Vec<SearchResult> {
    let mut out = Vec::new();
    for line in output.lines().map(str::trim) {
        if line.starts_with("Solution 1 ") || line == "Solution 1" {
            out.push(SearchResult::Solution);
        } else if line == "No solution." {
            out.push(SearchResult::NoSolution);
        }
    }
    out
}

/// Runs `source` and returns one result per search command.
pub fn run_searches(binary: &PathBuf, source: &str, expected: usize) -> Result<Vec<SearchResult>, CrossCheckError> {
    let mut child = Command::new(binary)
        .args(["-no-banner", "-no-advise", "-no-wrap"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()?;
    {
        let stdin = child.stdin.as_mut().expect("piped stdin");
        stdin.write_all(source.as_bytes())?;
        stdin.write_all(b"\nquit\n")?;
    }
    let output = child.wait_with_output()?;
    let results = parse_search_output(&String::from_utf8_lossy(&output.stdout));
    if results.len() != expected {
        return Err(CrossCheckError::Incomplete { found: results.len(), expected });
    }
    Ok(results)
}
