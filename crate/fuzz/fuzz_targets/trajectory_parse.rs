#![no_main]

use lanemerge_core::{parse_trajectory_str, DatasetFormat};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    for format in [DatasetFormat::NgsimText, DatasetFormat::NgsimCsv] {
        if let Ok(tracks) = parse_trajectory_str(text, format) {
            for t in &tracks {
                assert!(t
                    .samples()
                    .windows(2)
                    .all(|w| w[0].timestamp < w[1].timestamp));
            }
        }
    }
});
