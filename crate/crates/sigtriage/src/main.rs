use std::process::ExitCode;

fn main() -> ExitCode {
    sigtriage::cli::run()
}
