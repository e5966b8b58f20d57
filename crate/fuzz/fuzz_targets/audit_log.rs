#![no_main]

use libfuzzer_sys::fuzz_target;
use manet_core::audit::{parse_log, render, replay};

fuzz_target!(|data: &str| {
    if let Ok(records) = parse_log(data) {
        assert_eq!(parse_log(&render(&records)).as_ref(), Ok(&records));
        let _ = replay(&records);
    }
});
