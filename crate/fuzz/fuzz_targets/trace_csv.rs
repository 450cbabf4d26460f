#![no_main]

use libfuzzer_sys::fuzz_target;
use rtcdrift::fingerprint::{read_trace_csv, write_trace_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(trace) = read_trace_csv(text) else { return };
    // whatever parses must write back out
    let mut buf = Vec::new();
    write_trace_csv(&mut buf, &trace).expect("re-encode");
});
