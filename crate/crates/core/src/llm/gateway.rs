//! Asking for a parseable answer, with bounded repair follow-ups.

use serde::{Deserialize, Serialize};

use super::backend::{Backend, BackendError};
use super::extract::ResponseError;
use super::prompt::Prompt;

/// Follow-up prompts sent after an unusable answer.
pub const MAX_REPAIRS: usize = 2;

/// One request and what came back, kept for the run ledger.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exchange {
    pub prompt: Prompt,
    pub response: Option<String>,
    /// Why the answer was rejected, or the backend error.
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum GatewayError {
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("answer still unusable after {attempts} attempts: {last}")]
    Unparseable { attempts: usize, last: ResponseError },
}

/// Sends `prompt`, then up to [`MAX_REPAIRS`] follow-ups quoting the parse
/// error, until `parse` accepts an answer. Every exchange is appended to
/// `log`, including the failing ones.
pub fn request<T>(
    backend: &dyn Backend,
    prompt: &Prompt,
    parse: impl Fn(&str) -> Result<T, ResponseError>,
    log: &mut Vec<Exchange>,
) -> Result<T, GatewayError> {
    let mut current = prompt.clone();
    let mut attempts = 0;
    loop {
        attempts += 1;
        let text = match backend.complete(&current) {
            Ok(t) => t,
            Err(e) => {
                log.push(Exchange { prompt: current, response: None, error: Some(e.to_string()) });
                return Err(e.into());
            }
        };
        match parse(&text) {
            Ok(v) => {
                log.push(Exchange { prompt: current, response: Some(text), error: None });
                return Ok(v);
            }
            Err(e) => {
                log.push(Exchange { prompt: current, response: Some(text), error: Some(e.to_string()) });
                if attempts > MAX_REPAIRS {
                    return Err(GatewayError::Unparseable { attempts, last: e });
                }
                current = prompt.with_repair_note(&e.to_string());
            }
        }
    }
}
