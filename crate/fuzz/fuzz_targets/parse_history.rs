#![no_main]

use libfuzzer_sys::fuzz_target;
use selfsupport::optimizer::History;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(h) = History::parse_csv(text) {
            let written = h.to_csv();
            let back = History::parse_csv(&written).expect("re-parse");
            assert_eq!(back.to_csv(), written);
        }
    }
});
