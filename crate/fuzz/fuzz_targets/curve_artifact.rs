#![no_main]

use cascadeflow_core::calibration::artifact::{curve_to_string, parse_curve};
use cascadeflow_gateway::http::parse_curve_body;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_curve_body(data);
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(curve) = parse_curve(text) {
        assert_eq!(
            parse_curve(&curve_to_string(&curve)).expect("re-parse"),
            curve
        );
    }
});
