//! End-to-end acceptance checks, one pass/fail line each. Exits nonzero if
//! any check fails.

use minmetric::verify::{run, suite_ids};

fn main() {
    let ids = suite_ids("all").expect("suite");
    let mut failed = Vec::new();
    for &id in ids {
        let r = run(id, 0);
        println!(
            "criterion {:>2} [{}] {} ({:.1} s): {}",
            r.id,
            if r.pass { "PASS" } else { "FAIL" },
            r.name,
            r.seconds,
            r.detail
        );
        if !r.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all {} criteria passed", ids.len());
    } else {
        println!("acceptance: failed criteria {failed:?}");
        std::process::exit(1);
    }
}
