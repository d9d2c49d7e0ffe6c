#![no_main]

use cascadeflow_gateway::backend::decode_model_output;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = decode_model_output(data);
});
