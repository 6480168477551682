#![no_main]

use libfuzzer_sys::fuzz_target;
use pacman_core::action_lang::parse_action_description;
use pacman_core::planner::reachable_states;

// Input: a description, optionally followed by a line `---` and an initial
// condition.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let (domain, condition) = text.split_once("\n---\n").unwrap_or((text, ""));
    let Ok(desc) = parse_action_description(domain) else {
        return;
    };
    let Ok(initial) = desc.parse_condition(condition) else {
        return;
    };
    if let Ok(start) = desc.complete(&initial) {
        if let Ok(states) = reachable_states(&desc, &start) {
            assert!(states.iter().all(|s| desc.is_state(s)));
        }
    }
});
