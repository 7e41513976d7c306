#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::foundry::{clean_question, extract_sql, parse_exploration_reply, strip_fences};

fuzz_target!(|data: &str| {
    let _ = parse_exploration_reply(data);
    let _ = extract_sql(data);
    let _ = strip_fences(data);
    let _ = clean_question(data);
});
