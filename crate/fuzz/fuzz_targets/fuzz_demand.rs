//! Demand-profile parsing and validation must never panic on arbitrary
//! bytes.
//!
//! Run with: cargo +nightly fuzz run fuzz_demand
#![no_main]
use libfuzzer_sys::fuzz_target;
use qmarket_core::orchestrator::DemandProfile;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(hours) = serde_json::from_str::<Vec<f64>>(text) {
            let _ = DemandProfile::new(hours);
        }
    }
});
