use std::process::ExitCode;

fn main() -> ExitCode {
    platform_egt::cli::run(std::env::args_os())
}
