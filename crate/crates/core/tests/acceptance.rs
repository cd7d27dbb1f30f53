//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.

use std::process::ExitCode;

use terrace_lab::verify::{run_suite, VerifyConfig};

fn main() -> ExitCode {
    let cfg = VerifyConfig::default();
    let report = match run_suite(&cfg, None, |r| println!("{}  ({:.1} s)", r.line(), r.seconds)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("acceptance suite could not run: {e}");
            return ExitCode::FAILURE;
        }
    };
    let failed: Vec<u8> = report.criteria.iter().filter(|c| !c.pass).map(|c| c.id).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria pass", report.criteria.len());
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {} of {} criteria fail: {failed:?}", failed.len(), report.criteria.len());
        ExitCode::FAILURE
    }
}
