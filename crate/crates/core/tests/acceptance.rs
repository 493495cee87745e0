//! Runs the nine acceptance criteria and prints one line per criterion.

use coupled_plates::acceptance::{run_criterion, CRITERIA};
use std::process::ExitCode;

const SEED: u64 = 20240917;

fn main() -> ExitCode {
    let mut failed = 0;
    for id in CRITERIA {
        let outcome = run_criterion(id, SEED);
        println!("{}  ({:.1} s)", outcome.line(), outcome.seconds);
        if !outcome.pass {
            failed += 1;
        }
    }
    println!("acceptance: {} of {} criteria passed", CRITERIA.len() - failed, CRITERIA.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
