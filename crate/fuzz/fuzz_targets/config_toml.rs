#![no_main]

use libfuzzer_sys::fuzz_target;
use sqlforge_core::pipeline::PipelineConfig;

fuzz_target!(|data: &str| {
    let Ok(cfg) = PipelineConfig::from_toml_str(data) else { return };
    let again = PipelineConfig::from_toml_str(&cfg.to_toml_string()).expect("serialized config re-reads");
    assert_eq!(again, cfg);
});
