#![no_main]

use libfuzzer_sys::fuzz_target;
use pacman_core::actor_critic::{parse_snapshots, write_snapshots};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(tables) = parse_snapshots(text) {
        let printed = write_snapshots(&tables);
        let again = parse_snapshots(&printed).expect("printed snapshots parse");
        assert_eq!(write_snapshots(&again), printed);
    }
});
