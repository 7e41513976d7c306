#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::dataset::compute_stats;
use sqlforge_core::ledger::{completed_samples, parse_ledger};

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_ledger(data) {
        let _ = completed_samples(&records);
        let _ = compute_stats(&records, &[]);
    }
});
