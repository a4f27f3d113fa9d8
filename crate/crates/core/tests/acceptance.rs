//! Runs every acceptance criterion in order and prints one PASS/FAIL line
//! each, whether or not it passes. Exits nonzero if any criterion fails.
//! A plain `main` rather than libtest, so the lines are never captured.

use std::process::ExitCode;

use gamow_core::acceptance;

fn main() -> ExitCode {
    let outcomes = acceptance::run_all();
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<_> = outcomes.iter().filter(|o| !o.passed).map(|o| o.id.to_string()).collect();
    println!("\nacceptance: {} passed, {} failed", outcomes.len() - failed.len(), failed.len());
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("failed criteria: {}", failed.join(", "));
        ExitCode::FAILURE
    }
}
