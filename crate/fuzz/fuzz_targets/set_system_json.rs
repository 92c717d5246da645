#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(x) = chainbal::io::set_system_from_json(s) {
            let back = chainbal::io::set_system_from_json(&chainbal::io::set_system_to_json(&x)).unwrap();
            assert_eq!(back, x);
        }
    }
});
