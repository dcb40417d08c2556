#![no_main]
use libfuzzer_sys::fuzz_target;
use stl_core::data::SyntheticSpec;

fuzz_target!(|text: &str| {
    if let Ok(spec) = text.parse::<SyntheticSpec>() {
        let back: SyntheticSpec = spec.to_string().parse().expect("display output parses");
        assert_eq!(back, spec);
    }
});
