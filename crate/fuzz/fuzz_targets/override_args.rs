#![no_main]

use libfuzzer_sys::fuzz_target;
use manet_core::config::parse_override_args;
use manet_core::ScenarioConfig;

fuzz_target!(|data: &str| {
    let args: Vec<&str> = data.split('\0').collect();
    if let Ok(pairs) = parse_override_args(&args) {
        let mut config = ScenarioConfig::default();
        for (key, value) in pairs {
            let _ = config.set(&key, &value);
        }
        let _ = config.validate();
    }
});
