//! Raw dataset rows either parse or error with a line number — never panic.

#![no_main]

use coevo::datapool::parse_dataset_records;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    let _ = parse_dataset_records(src, "fuzz");
});
