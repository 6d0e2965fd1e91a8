#![no_main]
use darkdoc_core::analyzer::{decode_envelope, decode_response, encode_response, strip_fences, RequestKind};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Some((&selector, body)) = data.split_first() else {
        return;
    };
    let Ok(body) = std::str::from_utf8(body) else {
        return;
    };
    let kind = RequestKind::ALL[selector as usize % RequestKind::ALL.len()];
    let content = match decode_envelope(body) {
        Ok((content, _)) => content,
        Err(_) => body.to_string(),
    };
    if let Ok(payload) = decode_response(kind, strip_fences(&content)) {
        let again = decode_response(kind, &encode_response(&payload)).expect("encoded payload decodes");
        assert_eq!(again, payload);
    }
});
