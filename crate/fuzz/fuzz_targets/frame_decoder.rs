#![no_main]

use lanemerge_core::SafetyConfig;
use lanemerge_orchestrator::protocol::FrameDecoder;
use lanemerge_orchestrator::{KnowledgeBase, Orchestrator};
use libfuzzer_sys::fuzz_target;

// First byte picks the chunk size the stream is fed in.
fuzz_target!(|data: &[u8]| {
    let Some((&chunk, stream)) = data.split_first() else {
        return;
    };
    let chunk = usize::from(chunk).max(1);
    let orch = Orchestrator::new(KnowledgeBase::new(1000), None, SafetyConfig::default());
    let mut dec = FrameDecoder::new(512);
    for part in stream.chunks(chunk) {
        dec.push(part);
        while let Some(frame) = dec.next_frame() {
            if let Ok(frame) = frame {
                assert!(frame.len() <= 512);
                let _ = orch.handle_frame(1, &frame);
            }
        }
    }
    let _ = dec.finish();
});
