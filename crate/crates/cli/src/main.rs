use std::process::ExitCode;

fn main() -> ExitCode {
    ExitCode::from(gramtomo::app::main_with(std::env::args_os()))
}
