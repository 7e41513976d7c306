#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::dataset::{parse_seed, SeedFormat};

// Input is the samples document and the tables document separated by a NUL byte.
fuzz_target!(|data: &str| {
    let (samples, tables) = data.split_once('\0').unwrap_or((data, "[]"));
    for format in [SeedFormat::Spider, SeedFormat::Bird] {
        let _ = parse_seed(("samples", samples), ("tables", tables), format);
    }
});
