use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(kaya_lmdi_cli::run(std::env::args_os()) as u8)
}
