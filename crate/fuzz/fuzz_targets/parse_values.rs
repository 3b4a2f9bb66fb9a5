#![no_main]

//! Command-line value parsers: grid sizes, directions and run modes.

use libfuzzer_sys::fuzz_target;
use selfsupport::grid::{Direction, GridDims};
use selfsupport::report::Mode;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(d) = text.parse::<GridDims>() {
            assert_eq!(d.to_string().parse::<GridDims>().unwrap(), d);
        }
        if let Ok(d) = text.parse::<Direction>() {
            assert_eq!(d.to_string().parse::<Direction>().unwrap(), d);
        }
        if let Ok(m) = text.parse::<Mode>() {
            assert_eq!(m.to_string().parse::<Mode>().unwrap(), m);
        }
    }
});
