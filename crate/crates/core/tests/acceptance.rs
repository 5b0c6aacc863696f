//! Runs every acceptance criterion and prints one PASS/FAIL line each.
//! Built without the libtest harness so the lines are never captured.

use std::process::ExitCode;

use convdiss::acceptance::{run_all, AcceptanceOptions, CRITERIA};

fn main() -> ExitCode {
    let results = run_all(&AcceptanceOptions::default());
    assert_eq!(results.len(), CRITERIA.len());
    for r in &results {
        println!("{}", r.line());
    }
    let failed: Vec<u32> = results.iter().filter(|r| !r.passed).map(|r| r.id).collect();
    println!("acceptance: {}/{} criteria passed", results.len() - failed.len(), results.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        eprintln!("failed criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
