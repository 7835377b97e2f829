mod commands;
mod config;
mod io;

use std::process::ExitCode;

use clap::Parser;

use config::{Cli, CliError, Command, RunConfig};

fn run(cli: Cli) -> Result<(), CliError> {
    let cfg = RunConfig::try_from(cli.knobs)?;
    match cli.command {
        Command::Validate { gt, rollouts } => commands::validate(&cfg, &gt, &rollouts),
        Command::Score { gt, rollouts } => commands::score(&cfg, &gt, &rollouts),
        Command::Advantage { rewards } => commands::advantage(&cfg, &rewards),
        Command::Rcs { gt, rollouts } => commands::rcs_cmd(&cfg, &gt, &rollouts),
        Command::DbsRun { gt, policy, mode } => commands::dbs_run(&cfg, &gt, &policy, mode),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("contra: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
