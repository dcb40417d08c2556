#![no_main]
use libfuzzer_sys::fuzz_target;
use stl_core::data::{parse_csv, CsvSchema, TimestampKind};

// First byte picks the delimiter and timestamp mode; the rest is the file.
fuzz_target!(|data: &[u8]| {
    let Some((&mode, body)) = data.split_first() else {
        return;
    };
    let schema = CsvSchema {
        delimiter: [b',', b';', b'\t'][(mode % 3) as usize],
        timestamps: [TimestampKind::Auto, TimestampKind::Calendar, TimestampKind::Index][(mode / 3 % 3) as usize],
        channels: None,
    };
    let _ = parse_csv(body, &schema);
});
