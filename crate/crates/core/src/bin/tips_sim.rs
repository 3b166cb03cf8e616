use std::process::ExitCode;

fn main() -> ExitCode {
    tips_core::cli::main()
}
