#![no_main]

use cascadeflow_gateway::ServeConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ServeConfig::parse(text) {
        let _ = config.gateway_config().validate();
    }
});
