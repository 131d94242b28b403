#![no_main]

use libfuzzer_sys::fuzz_target;
use memsim_core::config::parse_number_list;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(values) = parse_number_list(text) {
            assert!(values.iter().all(|v| v.is_finite()));
        }
    }
});
