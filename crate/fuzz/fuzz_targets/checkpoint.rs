#![no_main]
use libfuzzer_sys::fuzz_target;
use stl_core::models::{decode_checkpoint, encode_checkpoint};

fuzz_target!(|text: &str| {
    if let Ok(model) = decode_checkpoint(text) {
        let again = encode_checkpoint(&model);
        assert!(decode_checkpoint(&again).is_ok());
    }
});
