#![no_main]

use crpsim::rules::parse_timeline_jsonl;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        let _ = parse_timeline_jsonl(s);
    }
});
