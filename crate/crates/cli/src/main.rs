use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use homerule::llm::{Backend, BackendConfig, BackendKind, HttpSettings, RefusingBackend, BACKEND_ENV};
use homerule::pipeline::{CommandError, CommandOutput, ExitStatus, PipelineConfig, Session, SystemArgs};

#[derive(Parser)]
#[command(name = "homerule", version, about = "Generate, verify and repair smart-home automation rules")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Complete an id/type/location device list from user manuals.
    Extract {
        /// Incomplete device list (ids, types, optional locations).
        #[arg(long)]
        devices: PathBuf,
        /// Directory of manual text files.
        #[arg(long)]
        manuals: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Generate rules for a device list.
    Generate {
        #[arg(long)]
        devices: PathBuf,
        #[arg(long)]
        preferences: Option<PathBuf>,
        /// Leave the conflict definitions out of the prompt.
        #[arg(long)]
        no_conflict_context: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Detect conflicts. Exits 0 when there are none and 1 otherwise.
    Verify {
        #[command(flatten)]
        system: SystemFiles,
        /// Report file; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One round of conflict-driven rule repair.
    Optimize {
        #[command(flatten)]
        system: SystemFiles,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Write the Maude module for a home and its rules.
    EmitMaude {
        #[command(flatten)]
        system: SystemFiles,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate, verify and optimize until conflict-free or out of iterations.
    Pipeline {
        /// Device list; an incomplete one when --manuals is given.
        #[arg(long)]
        devices: PathBuf,
        #[arg(long)]
        manuals: Option<PathBuf>,
        #[arg(long)]
        preferences: Option<PathBuf>,
        /// Start from these rules instead of generating them.
        #[arg(long)]
        rules: Option<PathBuf>,
        #[arg(long)]
        conflict_spec: Option<PathBuf>,
        #[arg(long)]
        overrides: Option<PathBuf>,
        #[arg(long, default_value_t = 3, value_parser = clap::value_parser!(u64).range(1..))]
        max_iterations: u64,
        #[arg(long)]
        depth_bound: Option<usize>,
        /// Also run the emitted module through a Maude interpreter if one is installed.
        #[arg(long)]
        maude_check: bool,
        #[arg(long)]
        no_conflict_context: bool,
        /// Skip asking the backend for logic code.
        #[arg(long)]
        no_logic_code: bool,
        /// Parent directory for the run ledger.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        backend: BackendArgs,
    },
    /// Recompute every iteration of a ledger and compare the reports.
    Replay { dir: PathBuf },
}

#[derive(Args)]
struct SystemFiles {
    #[arg(long)]
    devices: PathBuf,
    #[arg(long)]
    rules: PathBuf,
    #[arg(long)]
    conflict_spec: Option<PathBuf>,
    #[arg(long)]
    overrides: Option<PathBuf>,
    #[arg(long)]
    depth_bound: Option<usize>,
}

impl SystemFiles {
    fn args(self) -> SystemArgs {
        SystemArgs {
            devices: self.devices,
            rules: self.rules,
            conflict_spec: self.conflict_spec,
            overrides: self.overrides,
            depth_bound: self.depth_bound,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Mock,
    Http,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, env = BACKEND_ENV, default_value = "mock")]
    backend: Kind,
    #[arg(long)]
    base_url: Option<String>,
    #[arg(long)]
    model: Option<String>,
    /// Environment variable holding the API token.
    #[arg(long, default_value = "LLM_API_KEY")]
    api_key_env: String,
    #[arg(long, default_value_t = 60)]
    timeout: u64,
    #[arg(long, default_value_t = 2)]
    max_retries: u32,
}

impl BackendArgs {
    fn config(&self) -> Result<BackendConfig, CommandError> {
        let kind = match self.backend {
            Kind::Mock => BackendKind::Mock,
            Kind::Http => {
                let (Some(base_url), Some(model)) = (self.base_url.clone(), self.model.clone()) else {
                    return Err(CommandError {
                        status: ExitStatus::Usage,
                        message: "--backend http needs --base-url and --model".into(),
                    });
                };
                BackendKind::Http(HttpSettings { base_url, model, credential_env: self.api_key_env.clone() })
            }
        };
        Ok(BackendConfig { kind, timeout_secs: self.timeout, max_retries: self.max_retries })
    }
}

fn connect(config: &BackendConfig) -> Result<Box<dyn Backend>, CommandError> {
    config.connect().map_err(|e| CommandError { status: ExitStatus::Backend, message: e.to_string() })
}

fn run(command: Command) -> Result<CommandOutput, CommandError> {
    let offline = RefusingBackend::default();
    let offline = Session { backend: &offline };
    match command {
        Command::Verify { system, out } => offline.verify(&system.args(), out.as_deref()),
        Command::EmitMaude { system, out } => offline.emit_maude(&system.args(), &out),
        Command::Replay { dir } => offline.replay(&dir),
        Command::Extract { devices, manuals, out, backend } => {
            let b = connect(&backend.config()?)?;
            Session { backend: b.as_ref() }.extract(&devices, &manuals, out.as_deref())
        }
        Command::Generate { devices, preferences, no_conflict_context, out, backend } => {
            let b = connect(&backend.config()?)?;
            Session { backend: b.as_ref() }.generate(&devices, preferences.as_deref(), !no_conflict_context, out.as_deref())
        }
        Command::Optimize { system, out, backend } => {
            let b = connect(&backend.config()?)?;
            Session { backend: b.as_ref() }.optimize(&system.args(), out.as_deref())
        }
        Command::Pipeline {
            devices,
            manuals,
            preferences,
            rules,
            conflict_spec,
            overrides,
            max_iterations,
            depth_bound,
            maude_check,
            no_conflict_context,
            no_logic_code,
            out,
            backend,
        } => {
            let backend_config = backend.config()?;
            let b = connect(&backend_config)?;
            let config = PipelineConfig {
                manuals,
                preferences,
                conflict_spec,
                overrides,
                rules,
                backend: backend_config,
                max_iterations: max_iterations as usize,
                depth_bound,
                maude_check,
                conflict_context: !no_conflict_context,
                logic_code: !no_logic_code,
                ..PipelineConfig::new(devices, out)
            };
            Session { backend: b.as_ref() }.pipeline(&config)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(out) => {
            print!("{}", out.stdout);
            for m in &out.messages {
                eprintln!("{m}");
            }
            ExitCode::from(out.status.code() as u8)
        }
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.status.code() as u8)
        }
    }
}
