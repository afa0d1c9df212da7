//! The end-to-end loop, its run ledger, and the command implementations the
//! CLI exposes.

pub mod commands;
pub mod inputs;
pub mod ledger;
pub mod run;

pub use commands::{CommandError, CommandOutput, ExitStatus, Session, SystemArgs};
pub use ledger::{LedgerReader, RunLedger};
pub use run::{describe_rules, replay_ledger, run_pipeline, PipelineConfig, PipelineRun, RunStatus, RunSummary};
