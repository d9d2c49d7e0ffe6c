#![no_main]

use cascadeflow_core::dataset::{classification_line, parse_classification_line};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(record) = parse_classification_line(line) {
        // accepted records survive a round trip unchanged
        let again = parse_classification_line(&classification_line(&record)).expect("re-parse");
        assert_eq!(record, again);
    }
});
