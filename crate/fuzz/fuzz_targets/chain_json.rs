#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(c) = chainbal::io::chain_from_json(s) {
            assert_eq!(chainbal::io::chain_from_json(&chainbal::io::chain_to_json(&c)).unwrap(), c);
        }
    }
});
