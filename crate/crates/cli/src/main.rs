use std::process::ExitCode;

fn main() -> ExitCode {
    match mrhd_cli::commands::run(std::env::args_os()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
