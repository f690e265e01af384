#![no_main]

use libfuzzer_sys::fuzz_target;
use qrpl_core::offline::{decode_voucher, reassemble_qr, Transport};

/// Splits the input into frames, each preceded by a two-byte length.
fn frames(mut data: &[u8]) -> Vec<Vec<u8>> {
    let mut out = Vec::new();
    while data.len() >= 2 {
        let len = usize::from(u16::from_be_bytes([data[0], data[1]])).min(data.len() - 2);
        out.push(data[2..2 + len].to_vec());
        data = &data[2 + len..];
    }
    out
}

fuzz_target!(|data: &[u8]| {
    let frames = frames(data);
    let joined = reassemble_qr(&frames);
    let decoded = decode_voucher(Transport::Qr, &frames);
    if decoded.is_ok() {
        assert!(joined.is_ok());
    }
});
