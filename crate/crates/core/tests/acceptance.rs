//! One line per acceptance criterion; exits non-zero if any fails.

use std::time::Instant;

use nurules::acceptance::{Suite, DEFAULT_MASTER_SEED};
use nurules::ensemble::default_parallelism;

fn main() {
    let suite = Suite::new(DEFAULT_MASTER_SEED, default_parallelism());
    let mut failed = 0;
    for id in 1..=9 {
        let started = Instant::now();
        let result = suite.criterion(id);
        println!("{result} ({:.1}s)", started.elapsed().as_secs_f64());
        if !result.passed {
            failed += 1;
        }
    }
    println!("acceptance: {} passed, {failed} failed", 9 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
