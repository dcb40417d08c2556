#![no_main]
use libfuzzer_sys::fuzz_target;
use stl_core::experiment::parse_report_csv;

fuzz_target!(|text: &str| {
    let _ = parse_report_csv(text);
});
