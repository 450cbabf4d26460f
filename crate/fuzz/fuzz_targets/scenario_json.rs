#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use rtcdrift_cli::Scenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(s) = Scenario::from_json(text, Path::new(".")) {
        // resolving derived sections must fail cleanly, never panic
        let _ = s.rtc_config();
        let _ = s.drift_goal(32768.0);
        let _ = s.capture_config();
        let _ = s.bp_scenario();
    }
});
