#![no_main]

use crpsim::term::parse_term;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(t) = parse_term(s) {
        let shown = t.to_string();
        assert_eq!(parse_term(&shown).as_ref(), Ok(&t), "{shown}");
    }
});
