#![no_main]

use crpsim::projector::World;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = World::from_json(s);
    }
});
