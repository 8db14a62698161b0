mod io;
mod run;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    // clap exits with status 2 on usage errors and when called without
    // arguments, 0 for --help and --version
    let cli = run::Cli::parse();
    match run::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("beamseg: {e}");
            ExitCode::from(2)
        }
    }
}
