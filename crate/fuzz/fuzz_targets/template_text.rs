#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::template::{check_template_invariants, Provenance, Template};

fuzz_target!(|data: &str| {
    let Ok(t) = Template::parse(data, Provenance::Seed) else { return };
    let again = Template::parse(&t.render(), Provenance::Seed).expect("rendered template re-parses");
    assert_eq!(again.skeleton, t.skeleton);
    assert_eq!(again.id, t.id);
    let _ = check_template_invariants(&t.skeleton);
});
