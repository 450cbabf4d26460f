#![no_main]

use libfuzzer_sys::fuzz_target;
use rtcdrift::planner::{parse_jsonl, write_jsonl};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(emissions) = parse_jsonl(text) else { return };
    let n = emissions.len();
    let mut buf = Vec::new();
    write_jsonl(&mut buf, emissions).unwrap();
    let back = parse_jsonl(std::str::from_utf8(&buf).unwrap()).expect("round trip");
    assert_eq!(back.len(), n);
});
