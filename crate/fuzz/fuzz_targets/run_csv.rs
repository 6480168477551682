#![no_main]

use std::path::Path;

use libfuzzer_sys::fuzz_target;
use pacman_core::harness::{format_run, parse_run_csv};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(returns) = parse_run_csv(Path::new("fuzz.csv"), text) {
        let printed = format_run(&returns);
        let again = parse_run_csv(Path::new("fuzz.csv"), &printed).expect("printed runs parse");
        assert_eq!(format_run(&again), printed);
    }
});
