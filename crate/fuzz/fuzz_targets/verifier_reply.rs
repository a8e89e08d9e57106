//! Verifier-reply parser: accepted replies must satisfy the shape invariant
//! and round-trip identically through the canonical serialization.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::agents::{parse_verifier_reply, serialize_verifier_reply};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(reply) = parse_verifier_reply(text) {
        assert!(reply.shape_ok(), "parsed reply violates the shape invariant");
        let reparsed = parse_verifier_reply(&serialize_verifier_reply(&reply))
            .expect("canonical reply must re-parse");
        assert_eq!(reparsed, reply, "round-trip must be the identity");
    }
});
