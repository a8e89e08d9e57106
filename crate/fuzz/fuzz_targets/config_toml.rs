//! Config file decoding: TOML deserialization plus semantic validation must
//! never panic on arbitrary input.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::bench::config::BenchConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(config) = toml::from_str::<BenchConfig>(text) {
        let _ = config.validate();
    }
});
