use std::process::ExitCode;

fn main() -> ExitCode {
    specsense::cli::run()
}
