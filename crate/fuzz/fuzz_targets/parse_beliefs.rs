#![no_main]

use crpsim::projector::Beliefs;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = Beliefs::from_json(s);
    }
});
