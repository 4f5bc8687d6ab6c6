use std::process::ExitCode;

fn main() -> ExitCode {
    let code = reapt::cli::run(std::env::args().skip(1));
    ExitCode::from(code)
}
