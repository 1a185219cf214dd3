use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(thetawalk::cli::main_with_args(std::env::args().collect()))
}
