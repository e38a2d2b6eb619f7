use std::process::ExitCode;

fn main() -> ExitCode {
    resistkit::cli::configure_threads();
    let outcome = resistkit::cli::run(std::env::args_os());
    if let Some(d) = &outcome.diagnostic {
        eprintln!("{d}");
    }
    if let (Some(report), false) = (&outcome.report, outcome.written) {
        print!("{report}");
    }
    ExitCode::from(outcome.code as u8)
}
