#![no_main]

use lanemerge_harness::{read_trace, write_trace};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(trace) = read_trace(data) {
        let mut out = Vec::new();
        write_trace(&trace, &mut out).unwrap();
        assert_eq!(read_trace(&out[..]).unwrap(), trace);
    }
});
