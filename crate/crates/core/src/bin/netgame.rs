use std::process::ExitCode;

fn main() -> ExitCode {
    netgame::cli::run(std::env::args_os())
}
