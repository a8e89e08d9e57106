//! Direct-answer extraction: no panic on any input; every extracted label is
//! non-empty and normalized.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::agents::parse_direct_answer;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(answer) = parse_direct_answer(text) {
        assert!(!answer.trim().is_empty(), "parsed an empty answer label");
        assert_eq!(answer, answer.trim().to_uppercase(), "label not normalized");
    }
});
