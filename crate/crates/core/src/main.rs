use std::process::ExitCode;

fn main() -> ExitCode {
    fair_rmab::cli::main()
}
