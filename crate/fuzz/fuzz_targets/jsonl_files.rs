#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::dataset::parse_dataset;
use sqlforge_core::foundry::DomainRegistry;
use sqlforge_core::template::TemplatePool;

fuzz_target!(|data: &[u8]| {
    if let Ok(records) = parse_dataset(data, "fuzz") {
        for r in &records {
            let _ = r.schema();
            let _ = r.sql_ast();
        }
    }
    let _ = TemplatePool::read_jsonl(data);
    let _ = DomainRegistry::read_jsonl(data);
});
