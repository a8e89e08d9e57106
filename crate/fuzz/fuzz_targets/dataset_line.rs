//! Dataset JSONL line decoding: deserialization and the question's own
//! validation/derived views must never panic, whatever the line holds.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::protocol::types::Question;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(question) = serde_json::from_str::<Question>(text) {
        let _ = question.validate();
        let _ = question.labels();
        let _ = question.gold_label();
    }
});
