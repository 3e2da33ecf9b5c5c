use std::process::ExitCode;

fn main() -> ExitCode {
    underlay_sim::cli::run(std::env::args_os())
}
