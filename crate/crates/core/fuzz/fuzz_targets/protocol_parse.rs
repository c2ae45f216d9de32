#![no_main]
use libfuzzer_sys::fuzz_target;
use sasv_core::trials::{format_protocol, parse_protocol};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(trials) = parse_protocol(text) {
        assert_eq!(parse_protocol(&format_protocol(&trials)).expect("formatted protocol parses"), trials);
    }
});
