//! GENCO dataset parser must never panic on arbitrary bytes.
//!
//! Run with: cargo +nightly fuzz run fuzz_gencos
#![no_main]
use libfuzzer_sys::fuzz_target;
use qmarket_core::market::parse_gencos;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_gencos(text);
    }
});
