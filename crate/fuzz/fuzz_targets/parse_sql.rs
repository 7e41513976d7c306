#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::ast::{parse_sql, render_sql};
use sqlforge_core::template::{fill_template, matches_template, templatize_with_bindings};

fuzz_target!(|data: &str| {
    let Ok(ast) = parse_sql(data) else { return };
    let text = render_sql(&ast);
    let again = parse_sql(&text).expect("rendered SQL re-parses");
    assert_eq!(render_sql(&again), text);
    let (t, leaves) = templatize_with_bindings(&ast);
    let filled = fill_template(&t, &leaves).expect("own leaves fill the template");
    assert_eq!(render_sql(&filled), text);
    assert!(matches_template(&ast, &t));
});
