#![no_main]

use libfuzzer_sys::fuzz_target;
use tweezer_sim::config::parse_config;

fuzz_target!(|data: &str| {
    if let Ok(cfg) = parse_config(data) {
        let text = cfg.to_json().expect("valid config serializes");
        assert_eq!(parse_config(&text).expect("serialized config parses"), cfg);
    }
});
