#![no_main]

use libfuzzer_sys::fuzz_target;
use qrpl_cli::RunConfig;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(config) = RunConfig::from_toml(text) {
        let again = RunConfig::from_json(&config.canonical_json()).expect("canonical json parses");
        assert_eq!(again.hash_hex(), config.hash_hex());
    }
    let _ = RunConfig::from_json(text);
});
