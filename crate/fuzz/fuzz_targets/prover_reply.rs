//! Prover-reply parser: any input may be rejected but must never panic, and
//! every accepted proof must round-trip identically through its canonical
//! serialization.

#![no_main]

use libfuzzer_sys::fuzz_target;
use pvd::agents::{parse_prover_reply, serialize_proof};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(proof) = parse_prover_reply(text) {
        let reparsed =
            parse_prover_reply(&serialize_proof(&proof)).expect("canonical proof must re-parse");
        assert_eq!(reparsed, proof, "round-trip must be the identity");
    }
});
