use clap::error::ErrorKind;
use clap::Parser;

use nbiot_alloc::cli::{execute, Cli, ExitStatus};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitStatus::Success,
                _ => ExitStatus::InvalidInput,
            };
            let _ = e.print();
            std::process::exit(code.code());
        }
    };
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    let status = execute(&cli, &mut stdout.lock(), &mut stderr.lock());
    std::process::exit(status.code());
}
