#![no_main]

use libfuzzer_sys::fuzz_target;
use sgbdt_core::data::{load_dataset_from_reader, FeatureSpec, Schema, Task};

fuzz_target!(|data: &[u8]| {
    let schema = Schema {
        task: Task::Regression,
        label: "y".into(),
        label_values: None,
        features: vec![
            FeatureSpec::numerical("a", 0.0, 1.0),
            FeatureSpec::categorical("c", &["x", "y", "z"]),
        ],
    };
    // must never panic on arbitrary bytes; errors are fine
    let _ = load_dataset_from_reader(data, &schema);
});
