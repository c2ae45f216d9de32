#![no_main]
use libfuzzer_sys::fuzz_target;
use sasv_core::metrics::{format_metric_report, parse_metric_report};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(rows) = parse_metric_report(text) {
        let again = parse_metric_report(&format_metric_report(&rows)).expect("formatted report parses");
        assert_eq!(format_metric_report(&again), format_metric_report(&rows));
    }
});
