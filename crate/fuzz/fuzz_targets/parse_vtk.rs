#![no_main]

use libfuzzer_sys::fuzz_target;
use selfsupport::export::{parse_vtk, voxels_vtk};

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(v) = parse_vtk(text) {
            assert_eq!(v.density.len(), v.dims.len());
            let field = v.into_field();
            let again = parse_vtk(&voxels_vtk(&field, None)).expect("re-parse");
            assert_eq!(again.density, field.values());
        }
    }
});
