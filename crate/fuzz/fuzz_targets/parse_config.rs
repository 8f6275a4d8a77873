//! Any configuration the loader accepts must survive the resolve cycle: the
//! resolved TOML written next to a run has to load back and resolve to the
//! same bytes. Serialized equality sidesteps NaN's non-reflexive `==`.

#![no_main]

use coevo::config::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(src) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = RunConfig::from_toml_str(src) {
        let resolved = cfg.to_toml_string();
        let again = RunConfig::from_toml_str(&resolved).expect("resolved config loads");
        assert_eq!(again.to_toml_string(), resolved);
    }
});
