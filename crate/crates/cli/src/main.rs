mod args;
mod effects;
mod evaluate;
mod fit;
mod output;
mod simulate;

use std::process::ExitCode;

use clap::Parser;
use plam::error::ErrorClass;

use args::{Cli, Command};

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads.unwrap_or_else(plam::par::threads);
    let result = plam::par::with_threads(threads, || match cli.command {
        Command::Fit(a) => fit::run(a),
        Command::Evaluate(a) => evaluate::run(a),
        Command::Simulate(a) => simulate::run(a),
        Command::ExportEffects(a) => effects::run(a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.class() {
                ErrorClass::Config => 2,
                ErrorClass::Data => 3,
                ErrorClass::Fitting => 4,
            })
        }
    }
}
