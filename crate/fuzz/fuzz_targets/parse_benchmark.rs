//! Any benchmark the parser accepts must serialize canonically and reparse
//! to the same value; malformed input must come back as an error, not a panic.

#![no_main]

use coevo::env::{benchmark_to_jsonl, parse_benchmark};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(bench) = parse_benchmark(src, "fuzz") {
        let canon = benchmark_to_jsonl(&bench);
        let again = parse_benchmark(&canon, "fuzz-canon").expect("canonical form reparses");
        assert_eq!(benchmark_to_jsonl(&again), canon);
    }
});
