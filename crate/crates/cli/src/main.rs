use std::io;
use std::process::ExitCode;

use bernoulli_rdp_cli::args::Cli;
use bernoulli_rdp_cli::output::ErrorRecord;
use bernoulli_rdp_cli::{run, EXIT_VALIDATION};
use clap::error::ErrorKind;
use clap::Parser;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.render().to_string();
            eprintln!("{}", ErrorRecord::new("usage", msg.trim_end()).to_json());
            return ExitCode::from(EXIT_VALIDATION as u8);
        }
    };
    let stdout = io::stdout();
    let code = run(&cli, io::BufWriter::new(stdout.lock()));
    ExitCode::from(code as u8)
}
