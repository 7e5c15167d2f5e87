#![no_main]

use libfuzzer_sys::fuzz_target;
use sgbdt_core::model::Ensemble;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(model) = Ensemble::from_json(text) {
            // a parsed, arity-checked model must be safe to evaluate
            let row = vec![0.5; 4];
            if model.validate_arity(row.len()).is_ok() {
                let _ = model.predict(&row);
            }
        }
    }
});
