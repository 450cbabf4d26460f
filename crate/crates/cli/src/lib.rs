//! Scenario runner: loads a JSON scenario and runs one pipeline, writing
//! CSV or JSON-lines.

pub mod commands;
pub mod config;
mod error;
pub mod sweep;

use std::io::Write;
use std::path::PathBuf;

use clap::{Parser, Subcommand};

pub use config::Scenario;
pub use error::CliError;
pub use sweep::Sweep;

#[derive(Debug, Parser)]
#[command(name = "rtcdrift", version, about = "Acoustic RTC drift simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Scenario JSON; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,

    /// Overrides the scenario seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,

    /// key=start:stop:steps, replacing the scenario's sweep.
    #[arg(long, global = true)]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// A0 phase velocity and wavenumber over frequency or thickness (CSV).
    Dispersion,
    /// Excitation phase → induced phase map (CSV).
    Calibrate,
    /// Transducer emissions for the goal (JSON-lines).
    Plan,
    /// Runs the plan through plate, crystal and RTC; drift per event (CSV).
    Simulate,
    /// Fingerprints synthetic or recorded captures (CSV).
    Classify,
    /// Blood-pressure reading errors over drift (CSV).
    Bp,
    /// Damping attenuation sweep and clock synthesizer output (CSV).
    Counter,
}

impl Cli {
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let mut s = match &self.config {
            Some(p) => Scenario::load(p)?,
            None => Scenario::default(),
        };
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        Ok(s)
    }
}

/// Runs `cli` writing the result to `out`.
pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<(), CliError> {
    let scenario = cli.scenario()?;
    commands::dispatch(cli.command, &scenario, cli.sweep.as_ref(), out)
}

/// Runs `cli` into its `--out` file or stdout. A file is only replaced once
/// the run succeeds.
pub fn run_to_destination(cli: &Cli) -> Result<(), CliError> {
    match &cli.out {
        None => {
            let stdout = std::io::stdout();
            let mut w = std::io::BufWriter::new(stdout.lock());
            run(cli, &mut w)?;
            w.flush()?;
            Ok(())
        }
        Some(path) => {
            let mut tmp = path.clone().into_os_string();
            tmp.push(".partial");
            let tmp = PathBuf::from(tmp);
            let result = (|| {
                let mut w = std::io::BufWriter::new(std::fs::File::create(&tmp)?);
                run(cli, &mut w)?;
                w.flush()?;
                Ok(())
            })();
            match result {
                Ok(()) => {
                    std::fs::rename(&tmp, path)?;
                    Ok(())
                }
                Err(e) => {
                    let _ = std::fs::remove_file(&tmp);
                    Err(e)
                }
            }
        }
    }
}
