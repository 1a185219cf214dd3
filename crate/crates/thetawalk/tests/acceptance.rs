//! Acceptance suite: one line per criterion, nonzero exit if any fails.
//! `ACCEPTANCE_ONLY=1,5,13` restricts the run.

use std::process::ExitCode;

use thetawalk::verify;

fn main() -> ExitCode {
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let ids: Vec<u32> = only.unwrap_or_else(|| (1..=13).collect());
    let mut failed = Vec::new();
    for id in ids {
        let r = verify::run(id);
        println!("{}", r.line());
        for d in &r.details {
            println!("      {d}");
        }
        if !r.pass {
            failed.push(id);
        }
    }
    if failed.is_empty() {
        println!("acceptance: all criteria passed");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: failed criteria {failed:?}");
        ExitCode::FAILURE
    }
}
