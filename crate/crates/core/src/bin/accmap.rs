use std::process::ExitCode;

fn main() -> ExitCode {
    accmap::cli::main_with(std::env::args_os())
}
