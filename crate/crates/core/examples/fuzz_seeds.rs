//! Writes seed inputs for the fuzz targets.
//!
//! Usage: `cargo run -p qrpl-core --example fuzz_seeds -- fuzz/corpus`

use std::path::{Path, PathBuf};

use qrpl_core::crypto::{KeyPair, SchemeId};
use qrpl_core::encoding::Canonical;
use qrpl_core::ledger::{LedgerState, Payment, UtxoToken};
use qrpl_core::offline::{
    encode_voucher, offline_transfer, voucher_payload, DeviceState, KycTier, Transport,
};
use qrpl_core::rng::seeded;

fn write(dir: &Path, target: &str, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    let dir = dir.join(target);
    std::fs::create_dir_all(&dir)?;
    std::fs::write(dir.join(name), bytes)
}

/// Length-prefixed frames, the layout the QR target splits its input into.
fn frame_stream(frames: &[Vec<u8>]) -> Vec<u8> {
    let mut out = Vec::new();
    for f in frames {
        out.extend_from_slice(&(f.len() as u16).to_be_bytes());
        out.extend_from_slice(f);
    }
    out
}

fn main() -> std::io::Result<()> {
    let dir: PathBuf = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "fuzz/corpus".into())
        .into();
    let mut rng = seeded(2024);
    // Falcon keeps seeds small; one Dilithium seed covers the default scheme.
    for (i, scheme) in [
        SchemeId::Falcon512,
        SchemeId::EcdsaP256,
        SchemeId::Dilithium2,
    ]
    .into_iter()
    .enumerate()
    {
        let mut ledger = LedgerState::new();
        let owner = KeyPair::generate(scheme, &mut rng);
        let token = UtxoToken::for_owner(&owner, 40_000, 0);
        ledger.mint(token.clone()).expect("fresh token");
        let payee = KeyPair::generate(scheme, &mut rng);
        let p = ledger
            .create_transaction(
                &owner,
                &[token.token_id],
                &[
                    Payment::new(payee.public_key(), 30_000),
                    Payment::new(owner.public_key(), 9_997),
                ],
                3,
                &mut rng,
            )
            .expect("balanced transaction");
        write(
            &dir,
            "transaction",
            &format!("seed-{i}"),
            &p.tx.to_canonical_bytes(),
        )?;
        ledger.apply_transaction(&p.tx).expect("valid transaction");
        ledger.advance_height();
        write(
            &dir,
            "ledger_snapshot",
            &format!("seed-{i}"),
            &ledger.export_snapshot(),
        )?;

        let mut sender = DeviceState::new("sender", KeyPair::generate(scheme, &mut rng));
        let key = KeyPair::generate(scheme, &mut rng);
        let held = UtxoToken::for_owner(&key, 20_000, 0);
        sender.held.push((held, key));
        let mut recipient = DeviceState::new("recipient", KeyPair::generate(scheme, &mut rng));
        let v = offline_transfer(
            &mut sender,
            &mut recipient,
            5_000,
            KycTier::default(),
            &mut rng,
        )
        .expect("within tier");
        write(
            &dir,
            "voucher_nfc",
            &format!("seed-{i}"),
            &voucher_payload(&v),
        )?;
        // The QR seed keeps only the first frames so the corpus stays small.
        let frames = encode_voucher(&v, Transport::Qr);
        write(
            &dir,
            "voucher_qr",
            &format!("seed-{i}"),
            &frame_stream(&frames[..frames.len().min(2)]),
        )?;
    }
    write(
        &dir,
        "ledger_snapshot",
        "empty",
        &LedgerState::new().export_snapshot(),
    )?;
    Ok(())
}
