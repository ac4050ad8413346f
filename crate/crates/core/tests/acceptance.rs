//! Acceptance suite: every criterion at its stated tolerance and runtime,
//! one line per criterion. Exits nonzero if any criterion fails.

use quadric_core::green::QuadratureSpec;
use quadric_core::verify::{check_names, run_check};

fn main() {
    let spec = QuadratureSpec::default();
    let mut failed = 0;
    for (i, name) in check_names().into_iter().enumerate() {
        let report = run_check(name, &spec, 0).expect("known check");
        println!("criterion {:>2}: {report}", i + 1);
        if !report.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        println!("acceptance: {failed} criterion(s) failed");
        std::process::exit(1);
    }
    println!("acceptance: all criteria passed");
}
