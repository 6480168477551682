#![no_main]

use libfuzzer_sys::fuzz_target;
use pacman_core::session::protocol::{ClientMessage, Envelope};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(msg) = ClientMessage::parse(text) {
        let again = ClientMessage::parse(&msg.to_json()).expect("printed messages parse");
        assert_eq!(again.to_json(), msg.to_json());
    }
    if let Ok(envelope) = Envelope::parse(text) {
        let printed = envelope.to_json();
        assert!(Envelope::parse(&printed).is_ok());
    }
});
