#![no_main]

use libfuzzer_sys::fuzz_target;
use qrpl_core::encoding::Canonical;
use qrpl_core::ledger::{LedgerState, Transaction, Verdict};

fuzz_target!(|data: &[u8]| {
    if let Ok(tx) = Transaction::from_canonical_bytes(data) {
        let again = Transaction::from_canonical_bytes(&tx.to_canonical_bytes()).expect("re-encoded transaction decodes");
        assert_eq!(again, tx);
        // Nothing spends against an empty ledger.
        assert_ne!(LedgerState::new().validate_transaction(&tx), Verdict::Accept);
    }
});
