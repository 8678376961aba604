//! Acceptance suite: one line per criterion, nonzero exit on any unacceptable outcome.
//!
//! Set `DELPEZZO_SHARDS` to override the worker count and `DELPEZZO_ACCEPTANCE=desk`
//! for a reduced scale.

use std::process::ExitCode;
use std::time::Instant;

use delpezzo::checks::{run_all, Scale};

fn main() -> ExitCode {
    let shards = std::env::var("DELPEZZO_SHARDS")
        .ok()
        .and_then(|s| s.parse().ok())
        .filter(|&n: &usize| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let scale = match std::env::var("DELPEZZO_ACCEPTANCE").as_deref() {
        Ok("desk") => Scale::desk(shards),
        _ => Scale::acceptance(shards),
    };
    let start = Instant::now();
    println!("acceptance suite, {shards} shard(s)");
    let outcomes = run_all(&scale, |o| println!("{}", o.line()));
    let failed: Vec<u8> = outcomes.iter().filter(|o| !o.acceptable()).map(|o| o.id).collect();
    let strict = outcomes.iter().filter(|o| o.passed).count();
    println!(
        "summary: {strict}/{} passed outright, {} tolerated, {} failed ({:.1}s)",
        outcomes.len(),
        outcomes.iter().filter(|o| !o.passed && o.acceptable()).count(),
        failed.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        ExitCode::SUCCESS
    } else {
        println!("unacceptable criteria: {failed:?}");
        ExitCode::FAILURE
    }
}
