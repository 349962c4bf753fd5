//! Parameter-checkpoint parser must never panic on arbitrary bytes, and an
//! accepted checkpoint must always convert into a usable backend.
//!
//! Run with: cargo +nightly fuzz run fuzz_checkpoint
#![no_main]
use libfuzzer_sys::fuzz_target;
use qmarket_core::checkpoint::Checkpoint;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(checkpoint) = Checkpoint::from_json(text) {
            // Validated checkpoints must be loadable and evaluable.
            let backend = checkpoint.into_backend().expect("validated checkpoint loads");
            let _ = backend.forward(&[0.1, 0.2, 0.3, 0.4, 0.5, 0.6]);
        }
    }
});
