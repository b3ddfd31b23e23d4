#![no_main]

use lanemerge_orchestrator::protocol::{decode_message, encode_frame};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(msg) = decode_message(data) {
        let frame = encode_frame(&msg);
        assert_eq!(decode_message(&frame[..frame.len() - 1]).unwrap(), msg);
    }
});
