#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::schema::{read_ddl, render_ddl};

fuzz_target!(|data: &str| {
    let Ok(schema) = read_ddl(data) else { return };
    if schema.validate().is_err() {
        return;
    }
    let text = render_ddl(&schema);
    assert_eq!(read_ddl(&text).expect("rendered DDL re-reads"), schema);
});
