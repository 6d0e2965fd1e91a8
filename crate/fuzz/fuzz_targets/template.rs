#![no_main]
use std::collections::BTreeMap;

use darkdoc_core::analyzer::templates::substitute;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(template) = std::str::from_utf8(data) else {
        return;
    };
    let vars = BTreeMap::from([
        ("seed_context", "retail".to_string()),
        ("context", "{\"table\": \"dbo.t\"}".to_string()),
        ("response_schema", "{}".to_string()),
    ]);
    let rendered = substitute(template, &vars);
    if !template.contains("{{") {
        assert_eq!(rendered.as_deref().ok(), Some(template));
    }
});
