//! Single-call transcript parser: no panic on any input, and the derived
//! views of an accepted transcript must stay internally consistent (an
//! accept-no-change signal implies a zero answer-change count).

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::agents::parse_self_deliberation;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(transcript) = parse_self_deliberation(text) {
        let _ = transcript.delta();
        assert!(
            !transcript.is_anc() || transcript.delta() == 0,
            "ANC with a nonzero answer-change count"
        );
    }
});
