//! The code-generation adapter: a restricted call script, its lowering to a
//! Maude module, rendering, and a declaration check over the emitted text.

mod crosscheck;
mod lower;
mod program;
mod render;
mod scan;
mod script;

pub use crosscheck::{maude_binary, parse_search_output, run_searches, CrossCheckError, SearchResult};
pub use lower::{
    lit, lower_system_to_maude, lower_to_maude, Equation, EquationBlock, MaudeModule, OpDecl, RewriteRule,
    SearchCommand,
};
pub use program::{canonical_program, ProgramError};
pub use render::render_maude;
pub use scan::{check_declarations, ScanIssue};
pub use script::{
    parse_logic_script, render_logic_script, AdapterProgram, Call, InitialValue, ModelDevice, ModelTransition,
    ProgramIssue, ScriptError,
};
