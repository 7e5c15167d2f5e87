#![no_main]

use libfuzzer_sys::fuzz_target;
use sgbdt_core::experiment::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = serde_json::from_str::<ExperimentConfig>(text);
    }
});
