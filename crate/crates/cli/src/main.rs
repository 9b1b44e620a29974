use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

mod config;
mod output;
mod scenarios;

use config::{ExperimentConfig, Scenario};
use output::Outcome;

/// Runs spreading experiments for nonlocal monostable equations from TOML
/// configs. Without a subcommand, lists the available scenarios.
#[derive(Parser)]
#[command(name = "nlspread", version)]
struct Cli {
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Write artifacts here instead of the config's `output`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the available scenarios.
    List,
}

const THREADS_VAR: &str = "NLSPREAD_THREADS";

fn list_scenarios() -> String {
    let mut s = String::from("scenarios:\n");
    for sc in Scenario::ALL {
        s.push_str(&format!("  {:<20} {}\n", sc.name(), sc.description()));
    }
    s
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_VAR) {
        let n: usize = v
            .parse()
            .with_context(|| format!("{THREADS_VAR} must be a positive integer, got `{v}`"))?;
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(config_path: &Path, out_override: Option<PathBuf>) -> ExitCode {
    let cfg = match ExperimentConfig::load(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    let dir = out_override.unwrap_or_else(|| cfg.output.clone());
    let mut outcome = Outcome::default();
    let setup = match scenarios::resolve(&cfg) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("config error: {e}");
            let msg = format!("config error: {e}");
            if let Err(w) = output::write_all(&dir, config_path, &cfg, &outcome, Some(&msg)) {
                eprintln!("could not write artifacts: {w:#}");
            }
            return ExitCode::from(2);
        }
    };
    let result = scenarios::run(&cfg, &setup, &mut outcome);
    let error = result.err().map(|e| format!("{e:#}"));
    if let Err(e) = output::write_all(&dir, config_path, &cfg, &outcome, error.as_deref()) {
        eprintln!("could not write artifacts: {e:#}");
        return ExitCode::from(1);
    }
    for c in &outcome.checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(e) = &error {
        eprintln!("run aborted: {e}");
    }
    println!("artifacts in {}", dir.display());
    if error.is_none() && outcome.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("{e:#}");
        return ExitCode::from(2);
    }
    match cli.command {
        None | Some(Command::List) => {
            print!("{}", list_scenarios());
            ExitCode::SUCCESS
        }
        Some(Command::Run { config, out }) => run(&config, out),
    }
}
