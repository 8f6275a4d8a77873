//! Accepted grounder tables must round-trip losslessly through JSONL.

#![no_main]

use coevo::policy::{grounder_to_jsonl, parse_grounder};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_grounder(src, "fuzz") {
        let canon = grounder_to_jsonl(&model);
        let again = parse_grounder(&canon, "fuzz-canon").expect("canonical form reparses");
        assert_eq!(again, model);
        assert_eq!(grounder_to_jsonl(&again), canon);
    }
});
