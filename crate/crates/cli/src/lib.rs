//! Command implementations behind the `neuronhub` binary.

pub mod bench;
pub mod fetch;
pub mod ingest;

use std::ops::Range;

/// Parses `N` or `A..B` (end exclusive).
pub fn parse_range(raw: &str) -> Result<Range<u32>, String> {
    let bad = || format!("invalid range {raw:?}; expected N or A..B");
    match raw.split_once("..") {
        Some((a, b)) => {
            let (a, b): (u32, u32) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a > b {
                return Err(bad());
            }
            Ok(a..b)
        }
        None => {
            let n: u32 = raw.trim().parse().map_err(|_| bad())?;
            Ok(n..n + 1)
        }
    }
}
