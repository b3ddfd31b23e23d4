#![no_main]

use lanemerge_core::FEATURE_COUNT;
use lanemerge_ml::ModelBundle;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(bundle) = ModelBundle::from_json(text) {
        // a model that loads must predict without panicking
        let _ = bundle.predict(&[0.0; FEATURE_COUNT]);
        let _ = bundle.predict(&[1.0e4; FEATURE_COUNT]);
    }
});
