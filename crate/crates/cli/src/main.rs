use std::process::ExitCode;

fn main() -> ExitCode {
    elt_cli::main_with_args(std::env::args_os())
}
