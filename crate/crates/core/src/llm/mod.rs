//! Prompts, completion backends and answer parsing.

pub mod backend;
pub mod extract;
pub mod gateway;
pub mod mock;
pub mod prompt;

pub use backend::{
    complete, Backend, BackendConfig, BackendError, BackendKind, HttpBackend, HttpSettings, RefusingBackend,
    ScriptedBackend, BACKEND_ENV,
};
pub use extract::{
    extract_json_object, parse_devices_response, parse_logic_code_response, parse_rules_response,
    parse_rules_response_with, ResponseError,
};
pub use gateway::{request, Exchange, GatewayError, MAX_REPAIRS};
pub use mock::{logic_code_for, repair_rules, MockBackend};
pub use prompt::{
    build_prompt_code_generation, build_prompt_device_extraction, build_prompt_rule_generation,
    build_prompt_rule_optimization, serialize_conflict_information, Attachment, Prompt, PromptError, PromptKind,
};
