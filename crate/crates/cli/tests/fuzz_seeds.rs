//! Replays the checked-in fuzz corpus through the same checks as the fuzz
//! targets, so seeds stay meaningful on a stable toolchain.

use std::fs;
use std::path::PathBuf;

use iqc_cli::{parse_kappa_grid, AlgoSource};
use iqc_core::algorithms::{algorithm_to_json, parse_algorithm_json};
use iqc_core::sdp::SdpProblem;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let path = e.unwrap().path();
            (path.file_name().unwrap().to_string_lossy().into_owned(), fs::read_to_string(&path).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn algorithm_json_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("algorithm_json") {
        if let Ok(spec) = parse_algorithm_json(&text) {
            let algo = spec.realize().unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(parse_algorithm_json(&algorithm_to_json(&algo).to_string()).is_ok(), "{name}");
            accepted += 1;
        }
    }
    assert!(accepted >= 4);
}

#[test]
fn sdp_json_seeds() {
    let mut accepted = 0;
    for (name, text) in seeds("sdp_json") {
        if let Ok(p) = SdpProblem::from_json(&text) {
            let back = SdpProblem::from_json(&p.to_json().to_string()).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(back, p, "{name}");
            accepted += 1;
        }
    }
    assert_eq!(accepted, 2);
}

#[test]
fn kappa_grid_seeds() {
    for (name, text) in seeds("kappa_grid") {
        let ok = parse_kappa_grid(&text);
        match name.as_str() {
            "reversed" | "zero_count" => assert!(ok.is_err(), "{name}"),
            _ => assert!(ok.unwrap().iter().all(|k| k.is_finite() && *k >= 1.0), "{name}"),
        }
    }
}

#[test]
fn algo_source_seeds() {
    for (name, text) in seeds("algo_source") {
        let parsed = text.parse::<AlgoSource>();
        assert_eq!(parsed.is_ok(), !matches!(name.as_str(), "file_" | "newton"), "{name}");
    }
}
