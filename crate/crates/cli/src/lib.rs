//! Command-line front end for the `spillover` library.
//!
//! Every command resolves its configuration (defaults, then `--config`,
//! then flags), writes its outputs into one directory together with the
//! resolved config and a one-line-per-event `run.log`, and maps failures to
//! exit codes 1 (usage), 2 (data) and 3 (numeric).

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod runlog;

use args::Command;
use config::RunConfig;
use error::{CliError, CliResult};
use runlog::RunLog;

pub const RESOLVED_CONFIG: &str = "config.resolved.toml";
pub const RUN_LOG: &str = "run.log";

pub fn run(command: &Command) -> CliResult<()> {
    let config = RunConfig::resolve(command.args())?;
    let out = config.out_dir().to_path_buf();
    std::fs::create_dir_all(&out).map_err(|e| CliError::io(&out, e))?;
    let resolved = out.join(RESOLVED_CONFIG);
    std::fs::write(&resolved, config.to_toml()).map_err(|e| CliError::io(&resolved, e))?;

    let mut log = RunLog::default();
    log.event("start", &[("command", &command.name())]);
    let outcome = match command {
        Command::Rv(_) => commands::rv(&config, &mut log),
        Command::Fit(_) => commands::fit(&config, &mut log),
        Command::Connect(_) => commands::connect(&config, &mut log),
        Command::Roll(_) => commands::roll(&config, &mut log),
        Command::Synth(_) => commands::synth(&config, &mut log),
    };
    match &outcome {
        Ok(files) => {
            for file in files {
                log.event("wrote", &[("file", &file.display())]);
            }
            log.event("done", &[("status", &0)]);
        }
        Err(e) => log.event("failed", &[("status", &e.exit_code()), ("error", e)]),
    }
    log.write(&out.join(RUN_LOG))?;
    if let Ok(files) = &outcome {
        println!("{}: wrote {} file(s) to {}", command.name(), files.len(), out.display());
    }
    outcome.map(|_| ())
}
