#![no_main]
use darkdoc_core::run::RunConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(config) = RunConfig::parse(text) else {
        return;
    };
    let _ = config.digest();
    let _ = config.filters();
    let json = serde_json::to_string(&config).expect("config serializes");
    let again = RunConfig::parse(&json).expect("serialized config parses");
    assert_eq!(again.digest(), config.digest());
});
