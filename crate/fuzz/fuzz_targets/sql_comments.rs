#![no_main]
use darkdoc_core::output::parse_sql;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(script) = std::str::from_utf8(data) {
        if let Err(e) = parse_sql(script) {
            assert!(e.offset <= script.len());
        }
    }
});
