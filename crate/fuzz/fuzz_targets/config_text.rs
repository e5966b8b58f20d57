#![no_main]

use libfuzzer_sys::fuzz_target;
use manet_core::ScenarioConfig;

fuzz_target!(|data: &str| {
    if let Ok(config) = ScenarioConfig::from_text(data) {
        let text = config.to_text();
        let again = ScenarioConfig::from_text(&text).expect("rendered config parses");
        assert_eq!(again.to_text(), text);
        let _ = config.validate();
    }
});
