#![no_main]

use libfuzzer_sys::fuzz_target;
use selfsupport::problem::parse_problem;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(spec) = parse_problem(text) {
            // an accepted config must be usable
            spec.validate().expect("parsed config fails validation");
            let _ = spec.load_case();
            let _ = spec.kernel();
        }
    }
});
