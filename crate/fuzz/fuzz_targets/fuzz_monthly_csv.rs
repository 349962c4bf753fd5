//! The monthly.csv reader (round-trip partner of the writer) must never
//! panic on arbitrary bytes.
//!
//! Run with: cargo +nightly fuzz run fuzz_monthly_csv
#![no_main]
use libfuzzer_sys::fuzz_target;
use qmarket_core::report::parse_monthly_csv;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = parse_monthly_csv(text);
    }
});
