use std::process::ExitCode;

fn main() -> ExitCode {
    seqsample::cli::main_with_args(std::env::args_os())
}
