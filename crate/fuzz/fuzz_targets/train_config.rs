#![no_main]

use libfuzzer_sys::fuzz_target;
use sarcolor::models::TrainConfig;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(c) = TrainConfig::from_toml(text) {
            assert_eq!(TrainConfig::from_toml(&c.to_toml()).unwrap(), c);
        }
    }
});
