#![no_main]

use iqc_cli::parse_kappa_grid;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = parse_kappa_grid(text) {
        assert!(!grid.is_empty());
        assert!(grid.iter().all(|k| k.is_finite() && *k >= 1.0));
    }
});
