#![no_main]

use iqc_core::algorithms::{algorithm_to_json, parse_algorithm_json};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = parse_algorithm_json(text) {
        // Anything accepted must realize and survive a round trip.
        if let Ok(algo) = spec.realize() {
            let again = parse_algorithm_json(&algorithm_to_json(&algo).to_string());
            assert!(again.is_ok());
        }
    }
});
