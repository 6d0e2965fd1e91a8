#![no_main]
use darkdoc_core::ingest::parse_manifest;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Err(e) = parse_manifest(text) {
            let _ = e.to_string();
        }
    }
});
