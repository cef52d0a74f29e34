use std::process::ExitCode;

fn main() -> ExitCode {
    let code = wittenlab_cli::run_cli(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    ExitCode::from(code as u8)
}
