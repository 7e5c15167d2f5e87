#![no_main]

use libfuzzer_sys::fuzz_target;
use sgbdt_core::data::Schema;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = Schema::from_json(text);
    }
});
