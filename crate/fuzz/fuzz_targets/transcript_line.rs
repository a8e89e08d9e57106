//! Transcript envelope line decoding: accepted envelopes must re-serialize
//! and re-parse with identity fields intact.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::bench::transcript::TranscriptEnvelope;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(envelope) = serde_json::from_str::<TranscriptEnvelope>(text) {
        let reserialized = serde_json::to_string(&envelope).expect("envelope serializes");
        let again: TranscriptEnvelope =
            serde_json::from_str(&reserialized).expect("canonical envelope re-parses");
        assert_eq!(again.run_id, envelope.run_id);
        assert_eq!(again.seq, envelope.seq);
    }
});
