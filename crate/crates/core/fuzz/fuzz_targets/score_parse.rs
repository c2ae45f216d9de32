#![no_main]
use libfuzzer_sys::fuzz_target;
use sasv_core::metrics::{format_scores, parse_scores};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(scores) = parse_scores(text) {
        let again = parse_scores(&format_scores(&scores)).expect("formatted scores parse");
        assert_eq!(again.entries(), scores.entries());
    }
});
