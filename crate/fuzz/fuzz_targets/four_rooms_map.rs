#![no_main]

use libfuzzer_sys::fuzz_target;
use pacman_core::envs::{Environment, FourRooms, FourRoomsMap, FourRoomsRewards};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(map) = FourRoomsMap::parse(text) else {
        return;
    };
    if text.len() > 400 {
        return;
    }
    if let Ok(env) = FourRooms::new(map, FourRoomsRewards::default()) {
        let s = env.reset();
        let _ = env.view(s);
        let _ = env.layout();
    }
});
