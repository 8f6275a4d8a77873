//! Accepted planner tables must round-trip losslessly through JSONL.

#![no_main]

use coevo::policy::{parse_planner, planner_to_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(model) = parse_planner(src, "fuzz") {
        let canon = planner_to_jsonl(&model);
        let again = parse_planner(&canon, "fuzz-canon").expect("canonical form reparses");
        assert_eq!(again, model);
        assert_eq!(planner_to_jsonl(&again), canon);
    }
});
