#![no_main]

use libfuzzer_sys::fuzz_target;
use rtcdrift::lamb::MediumDb;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(db) = MediumDb::parse(text) {
        for rec in db.records() {
            // accepted rows must build a plate without panicking
            let _ = rec.plate(0.005, 0.9);
        }
    }
});
