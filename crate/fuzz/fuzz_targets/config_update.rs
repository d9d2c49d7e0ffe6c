#![no_main]

use cascadeflow_gateway::config::parse_config_update;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_config_update(data);
});
