#![no_main]

use iqc_core::sdp::SdpProblem;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(problem) = SdpProblem::from_json(text) {
        let back = SdpProblem::from_json(&problem.to_json().to_string()).expect("re-decode");
        assert_eq!(back.n_vars, problem.n_vars);
    }
});
