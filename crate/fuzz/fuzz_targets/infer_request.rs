#![no_main]

use cascadeflow_gateway::parse_infer_request;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_infer_request(data);
});
