#![no_main]
use libfuzzer_sys::fuzz_target;
use stl_core::runfile::{RunConfig, RunFile};

fuzz_target!(|text: &str| {
    if let Ok(file) = RunFile::parse(text) {
        if let Ok(cfg) = RunConfig::resolve(&file, None) {
            let _ = RunFile::parse(&cfg.to_runfile().to_toml());
        }
    }
});
