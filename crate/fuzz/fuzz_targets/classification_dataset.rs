#![no_main]

use cascadeflow_core::calibration::{sweep_thresholds, CostDefaults, Grid};
use cascadeflow_core::dataset::read_classification;
use cascadeflow_core::RouterPolicy;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(records) = read_classification(data) else {
        return;
    };
    if records.len() <= 64 {
        if let Ok(curve) = sweep_thresholds(
            &records,
            &RouterPolicy::energy(0.0),
            &Grid::Auto,
            CostDefaults::default(),
        ) {
            curve.validate().expect("sweep output is a valid curve");
        }
    }
});
