#![no_main]

use libfuzzer_sys::fuzz_target;
use pacman_core::feedback::FeedbackScenario;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(scenario) = FeedbackScenario::parse(text) {
        let printed = scenario.to_text();
        let again = FeedbackScenario::parse(&printed).expect("printed scenarios parse");
        assert_eq!(again.to_text(), printed);
    }
});
