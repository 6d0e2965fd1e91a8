#![no_main]
use darkdoc_core::run::RunState;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(state) = RunState::from_json(text) else {
        return;
    };
    let once = state.to_json();
    let reread = RunState::from_json(&once).expect("written state reloads");
    assert_eq!(reread.to_json(), once);
});
