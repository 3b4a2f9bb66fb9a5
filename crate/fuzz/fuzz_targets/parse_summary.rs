#![no_main]

use libfuzzer_sys::fuzz_target;
use selfsupport::report::Summary;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(s) = Summary::parse_csv(text) {
            // NaN never compares equal, so compare the re-written text
            let written = s.to_csv();
            let back = Summary::parse_csv(&written).expect("re-parse");
            assert_eq!(back.to_csv(), written);
        }
    }
});
