#![no_main]

use libfuzzer_sys::fuzz_target;
use rtcdrift::fingerprint::{decode_trace, encode_trace};

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = decode_trace(data) {
        let again = decode_trace(&encode_trace(&trace)).expect("round trip");
        assert_eq!(again.samples.len(), trace.samples.len());
        assert_eq!(again.sample_rate.to_bits(), trace.sample_rate.to_bits());
    }
});
