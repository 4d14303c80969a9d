use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(sim_harness::cli::run_from(std::env::args_os()))
}
