#![no_main]

use libfuzzer_sys::fuzz_target;
use qrpl_core::ledger::LedgerState;

fuzz_target!(|data: &[u8]| {
    if let Ok(ledger) = LedgerState::import_snapshot(data) {
        let again = LedgerState::import_snapshot(&ledger.export_snapshot()).expect("re-exported snapshot imports");
        assert_eq!(again, ledger);
        let _ = ledger.audit();
    }
});
