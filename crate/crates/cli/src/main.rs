use std::io::Write;
use std::process::ExitCode;

use tsproc_cli::commands;

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    match commands::run(&argv) {
        Err(e) => e.exit(),
        Ok((_, Err(err))) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
        Ok((cli, Ok(report))) => {
            // a closed pipe downstream is not an error of ours
            let _ = writeln!(std::io::stdout(), "{}", report.to_json(cli.pretty));
            ExitCode::from(report.exit_code() as u8)
        }
    }
}
