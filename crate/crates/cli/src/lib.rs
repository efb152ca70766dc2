//! Configuration, orchestration and deterministic output for the `ruelle`
//! command-line tool.
//!
//! `ruelle <command> --config <path> [--out <dir>] [--threads N]` with
//! commands `pressure`, `rates`, `ldp` and `scan`. With `--out`, the CSV and
//! the JSON manifest are written to `<dir>/<command>.csv` and
//! `<dir>/<command>.manifest.json`; without it the CSV goes to stdout and the
//! manifest to stderr.

use std::io::Write;
use std::path::{Path, PathBuf};

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::{cmd_ldp, cmd_pressure, cmd_rates, cmd_scan, run, run_with_manifest, Command, RunOutput};
pub use config::{config_hash, parse_config, parse_config_str, ExperimentConfig};
pub use error::{CliError, ValidationError, EXIT_GUARD_TRIP, EXIT_NUMERICAL, EXIT_OK, EXIT_VALIDATION};
pub use output::{CsvTable, RunManifest, Warning, WarningKind};

/// Paths of the files written by [`execute`] under `--out`.
pub fn output_paths(out: &Path, command: Command) -> (PathBuf, PathBuf) {
    (out.join(format!("{command}.csv")), out.join(format!("{command}.manifest.json")))
}

/// Parses, runs and writes one command; returns the process exit code.
pub fn execute(command: Command, config_path: &Path, out: Option<&Path>) -> i32 {
    let (csv, manifest) = match parse_config(config_path) {
        Ok(cfg) => {
            let (csv, manifest) = run_with_manifest(command, &cfg);
            (csv.map_err(|e| eprintln!("error: {e}")).ok(), manifest)
        }
        Err(e) => {
            eprintln!("error: {e}");
            let hash = std::fs::read(config_path).ok().map(|b| config_hash(&b));
            let mut m = RunManifest::new(command.name(), hash);
            m.exit_code = e.exit_code();
            m.error = Some(e.to_string());
            (None, m)
        }
    };
    match write_outputs(command, csv.as_deref(), &manifest, out) {
        Ok(()) => manifest.exit_code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn write_outputs(
    command: Command,
    csv: Option<&str>,
    manifest: &RunManifest,
    out: Option<&Path>,
) -> Result<(), CliError> {
    let io = |path: &Path| {
        let path = path.to_path_buf();
        move |source| CliError::Io { path, source }
    };
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir).map_err(io(dir))?;
            let (csv_path, manifest_path) = output_paths(dir, command);
            if let Some(csv) = csv {
                std::fs::write(&csv_path, csv).map_err(io(&csv_path))?;
            }
            std::fs::write(&manifest_path, manifest.to_json()).map_err(io(&manifest_path))?;
        }
        None => {
            if let Some(csv) = csv {
                std::io::stdout().lock().write_all(csv.as_bytes()).map_err(io(Path::new("<stdout>")))?;
            }
            std::io::stderr().lock().write_all(manifest.to_json().as_bytes()).map_err(io(Path::new("<stderr>")))?;
        }
    }
    Ok(())
}
