#![no_main]
use libfuzzer_sys::fuzz_target;
use stl_core::experiment::RunManifest;

fuzz_target!(|text: &str| {
    let _ = RunManifest::from_json(text);
});
