#![no_main]
use darkdoc_core::model::{ObjectId, TableRef};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let _ = TableRef::parse(text);
    if let Ok(id) = ObjectId::try_from(text.to_string()) {
        let again = ObjectId::try_from(id.to_string()).expect("rendered id parses");
        assert_eq!(again, id);
    }
});
