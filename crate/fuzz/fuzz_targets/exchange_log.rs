#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::gateway::{parse_exchange_line, ReplayBackend};

fuzz_target!(|data: &str| {
    for line in data.lines() {
        let _ = parse_exchange_line(line);
    }
    let _ = ReplayBackend::from_reader(data.as_bytes());
});
