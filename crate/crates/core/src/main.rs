use std::process::ExitCode;

fn main() -> ExitCode {
    dualjet::cli::run(std::env::args_os())
}
