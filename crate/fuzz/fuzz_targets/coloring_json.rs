#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(f) = chainbal::io::coloring_from_json(s) {
            assert_eq!(chainbal::io::coloring_from_json(&chainbal::io::coloring_to_json(&f)).unwrap(), f);
        }
    }
});
