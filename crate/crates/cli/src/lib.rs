//! Command-line front end for `bdp-core`.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod io;
pub mod output;

use std::path::PathBuf;

use args::{Cli, Command};
use config::RunConfig;
use error::CliError;

/// Runs a parsed command line, printing its JSON document.
pub fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    configure_threads(cli.threads.or(cfg.threads))?;
    let json_out = |out: &Option<PathBuf>| out.clone().or_else(|| cfg.out.clone());
    match &cli.command {
        Command::Simulate(a) => commands::emit(&commands::simulate(a, &cfg)?, None),
        Command::Fit(a) => commands::emit(&commands::fit(a, &cfg)?, json_out(&a.out).as_deref()),
        Command::Prob(a) => commands::emit(&commands::prob(a, &cfg)?, a.out.as_deref()),
        Command::Estep(a) => commands::emit(&commands::estep(a, &cfg)?, a.out.as_deref()),
        Command::Loglik(a) => commands::emit(&commands::loglik(a, &cfg)?, a.out.as_deref()),
    }
}

fn configure_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--threads must be at least 1".into()));
    }
    // a second call in the same process (tests) keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global();
    Ok(())
}
