//! Runs every acceptance criterion at the default suite settings and prints
//! one line per criterion. Exits nonzero if any criterion fails.
//!
//! `cargo test --test acceptance -- 3 7` runs a subset.

use std::process::ExitCode;

use cone_exponents::acceptance::{Settings, Suite};
use cone_exponents::cache::ExponentCache;

fn main() -> ExitCode {
    // libtest flags such as --nocapture may be passed through; ignore them
    let ids: Vec<u8> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut suite = Suite::new(Settings::default(), ExponentCache::memory());
    println!("acceptance criteria");
    let outcomes = suite.run(&ids, |o| println!("{o}  ({:.1}s)", o.seconds));
    let failed = outcomes.iter().filter(|o| !o.pass).count();
    println!("{} of {} criteria passed", outcomes.len() - failed, outcomes.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
