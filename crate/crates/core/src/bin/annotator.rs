use std::process::ExitCode;

fn main() -> ExitCode {
    alarm_annotator::cli::main()
}
