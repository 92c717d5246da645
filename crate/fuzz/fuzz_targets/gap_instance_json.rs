#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(s) = std::str::from_utf8(data) {
        if let Ok(g) = chainbal::io::gap_instance_from_json(s) {
            let order = chainbal::gapfill::greedy_order(&g).unwrap();
            assert_eq!(order.len(), g.i.len());
        }
    }
});
