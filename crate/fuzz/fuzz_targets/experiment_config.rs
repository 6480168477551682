#![no_main]

use libfuzzer_sys::fuzz_target;
use pacman_core::harness::ExperimentConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = ExperimentConfig::parse(text) {
        let printed = config.to_toml();
        let again = ExperimentConfig::parse(&printed).expect("printed configs parse");
        assert_eq!(again.to_toml(), printed);
    }
});
