use std::io;
use std::process::ExitCode;

use weaver::cli::{run_cli, CAP_ENV_VAR};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cap = std::env::var(CAP_ENV_VAR).ok();
    let status = run_cli(&argv, cap.as_deref(), &mut io::stdout().lock(), &mut io::stderr().lock());
    ExitCode::from(status as u8)
}
