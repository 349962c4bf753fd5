//! Experiment-config parser must never panic on arbitrary bytes.
//!
//! Run with: cargo +nightly fuzz run fuzz_config
#![no_main]
use libfuzzer_sys::fuzz_target;
use qmarket_core::config::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = ExperimentConfig::from_json(text);
    }
});
