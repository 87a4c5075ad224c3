//! `egw` command-line front end.

mod args;
mod commands;
mod error;
mod input;
mod output;

use clap::Parser;

use args::{Cli, Command};
use error::CliError;

fn main() {
    let json_errors = std::env::args().any(|a| a == "--json-errors");
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                e.exit();
            }
            let err = CliError::Validation(e.render().to_string().trim().to_string());
            report(&err, json_errors);
            std::process::exit(err.exit_code());
        }
    };
    let g = &cli.global;
    let result = match &cli.command {
        Command::Solve(a) => commands::solve(a, g),
        Command::Sinkhorn(a) => commands::sinkhorn(a, g),
        Command::Debias(a) => commands::debias(a, g),
        Command::Benchmark(a) => commands::benchmark(a, g),
        Command::Sweep(a) => commands::sweep(a, g),
        Command::Validate(a) => commands::validate(a, g),
    };
    if let Err(err) = result {
        report(&err, g.json_errors);
        std::process::exit(err.exit_code());
    }
}

fn report(err: &CliError, json: bool) {
    if json {
        eprintln!("{}", err.to_json());
    } else {
        eprintln!("error: {err}");
    }
}
