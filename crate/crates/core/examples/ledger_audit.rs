//! Register clients, open a session, export the chain and catch tampering.

use chainfl::ledger::*;

fn main() -> Result<()> {
    let mut ledger = Ledger::new();
    let alice = ledger.register_client("wallet-alice")?;
    let bob = ledger.register_client("wallet-bob")?;
    println!("registered {} and {}", alice.client_id, bob.client_id);
    if let Err(e) = ledger.register_client("wallet-alice") {
        println!("second registration refused: {e}");
    }

    ledger.append(Transaction::TT1(InitTx {
        session_id: "demo".into(),
        owner_id: "owner".into(),
        public_key_ref: "pk-hash".into(),
        encryption_context: EncryptionContext { poly_degree: 4096 },
        total_rounds: 3,
        session_reward: 100.0,
    }))?;
    for (client, model) in [(&alice, "m-a"), (&bob, "m-b")] {
        ledger.append(Transaction::TT2(StorageTx {
            session_id: "demo".into(),
            round: 1,
            client_id: client.client_id.clone(),
            model_id: model.into(),
            offset_cipher: "...".into(),
        }))?;
    }
    println!("height {}, {} storage records in round 1", ledger.height(), ledger.storage_txs("demo", 1).len());

    let export = ledger.export_string();
    let restored = Ledger::import_jsonl(export.as_bytes())?;
    restored.verify()?;
    println!("exported {} lines, reimported chain verifies", export.lines().count());

    let mut blocks = ledger.blocks().to_vec();
    if let Transaction::TT2(s) = &mut blocks[1].tx_list[0] {
        s.model_id = "forged".into();
    }
    match verify_blocks(&blocks) {
        Err(e) => println!("tampered copy rejected: {e}"),
        Ok(()) => println!("tampering went unnoticed"),
    }
    Ok(())
}
