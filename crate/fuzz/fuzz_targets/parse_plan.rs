#![no_main]

use crpsim::lang::{parse_plan, print_plan};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(s) = std::str::from_utf8(data) else { return };
    if let Ok(p) = parse_plan(s) {
        // printing a parsed plan must give source that parses back to it
        let printed = print_plan(&p);
        assert_eq!(parse_plan(&printed).as_ref(), Ok(&p), "{printed}");
    }
});
