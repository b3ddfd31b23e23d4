#![no_main]

use lanemerge_core::dataset::{read_dataset, write_dataset};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(samples) = read_dataset(data) {
        let mut out = Vec::new();
        write_dataset(&mut out, &samples).unwrap();
        assert_eq!(read_dataset(&out[..]).unwrap().len(), samples.len());
    }
});
