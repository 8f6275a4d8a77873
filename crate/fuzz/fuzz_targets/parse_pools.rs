//! Accepted pool snapshots must round-trip losslessly through JSONL.

#![no_main]

use coevo::trainer::{parse_pools, pools_to_jsonl};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok((planners, verifiers)) = parse_pools(src, "fuzz") {
        let canon = pools_to_jsonl(&planners, &verifiers);
        let (p2, v2) = parse_pools(&canon, "fuzz-canon").expect("canonical form reparses");
        assert_eq!(p2, planners);
        assert_eq!(v2, verifiers);
        assert_eq!(pools_to_jsonl(&p2, &v2), canon);
    }
});
