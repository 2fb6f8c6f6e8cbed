use clap::error::ErrorKind;
use clap::Parser;

use fraccurve_cli::args::Cli;
use fraccurve_cli::{commands, exit_code};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 3,
            };
            let _ = err.print();
            std::process::exit(code);
        }
    };
    if let Err(err) = commands::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(exit_code(&err));
    }
}
