use std::process::ExitCode;

fn main() -> ExitCode {
    nvchain::cli::main_entry()
}
