//! Prints one line per acceptance criterion; exits nonzero if any fails.

use std::process::ExitCode;
use std::time::Instant;

fn main() -> ExitCode {
    let start = Instant::now();
    let out = ifb_validation::run_all();
    for o in &out {
        println!("{o}");
    }
    let failed = out.iter().filter(|o| !o.passed).count();
    println!("{} criteria, {failed} failed, {:.1?}", out.len(), start.elapsed());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
