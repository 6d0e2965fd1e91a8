#![no_main]
use darkdoc_core::ingest::{parse_delimited, write_delimited};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(records) = parse_delimited(text) else {
        return;
    };
    // Re-encoding what was parsed must parse back to the same records.
    let Some((header, rows)) = records.split_first() else {
        return;
    };
    let Some(names) = header.iter().map(|c| c.as_deref()).collect::<Option<Vec<&str>>>() else {
        return;
    };
    let encoded = write_delimited(names.iter().copied(), rows.iter().cloned());
    let again = parse_delimited(&encoded).expect("encoder output parses");
    assert_eq!(again, records);
});
