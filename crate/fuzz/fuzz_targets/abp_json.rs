#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(abp) = chainbal::io::abp_from_json(s) {
            assert_eq!(chainbal::io::abp_from_json(&chainbal::io::abp_to_json(&abp)).unwrap(), abp);
        }
    }
});
