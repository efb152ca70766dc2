use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use ruelle_cli::{execute, Command};

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Cmd {
    /// Shift and flow pressure, the centering shift and the range of averages.
    Pressure,
    /// Rate functions over the configured a-grid.
    Rates,
    /// Shrinking-window large deviations against the local asymptote.
    Ldp,
    /// Decay of the two-parameter operator family over the (b, kappa) grid.
    Scan,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Pressure => Command::Pressure,
            Cmd::Rates => Command::Rates,
            Cmd::Ldp => Command::Ldp,
            Cmd::Scan => Command::Scan,
        }
    }
}

#[derive(Parser, Debug)]
#[command(version, about = "Transfer operators, pressure and large deviations on subshifts of finite type")]
struct Cli {
    #[arg(value_enum)]
    command: Cmd,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory for `<command>.csv` and `<command>.manifest.json`; stdout/stderr if absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads; 0 or absent lets rayon decide.
    #[arg(long, env = "THREADS")]
    threads: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    if let Some(n) = cli.threads.filter(|&n| n > 0) {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let code = execute(cli.command.into(), &cli.config, cli.out.as_deref());
    ExitCode::from(code as u8)
}
