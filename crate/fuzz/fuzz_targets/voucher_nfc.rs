#![no_main]

use libfuzzer_sys::fuzz_target;
use qrpl_core::offline::{decode_payload, voucher_payload};

fuzz_target!(|data: &[u8]| {
    if let Ok(v) = decode_payload(data) {
        assert_eq!(decode_payload(&voucher_payload(&v)).as_ref(), Ok(&v));
    }
});
