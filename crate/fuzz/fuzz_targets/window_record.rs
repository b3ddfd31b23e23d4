#![no_main]

use lanemerge_core::window::parse_window_record;
use lanemerge_core::{build_dataset, SafetyConfig};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(line) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(w) = parse_window_record(line) {
        // anything that validates must also label
        let samples = build_dataset(std::slice::from_ref(&w), &SafetyConfig::default());
        assert_eq!(samples.len(), w.m_samples.len());
    }
});
