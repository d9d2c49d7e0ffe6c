#![no_main]

use cascadeflow_core::dataset::{detection_line, parse_detection_line};
use cascadeflow_core::energy::detection_total_energy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(record) = parse_detection_line(line) {
        let _ = detection_total_energy(&record.sample);
        let again = parse_detection_line(&detection_line(&record)).expect("re-parse");
        assert_eq!(record, again);
    }
});
