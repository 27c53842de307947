//! The two storage oracles only answer the contract that owns them.

use chainfl::oracle::*;

fn main() -> Result<()> {
    let dir = std::env::temp_dir().join("chainfl-oracle-demo");
    let models = ModelOracle::on_disk(dir.join("models"))?;
    let keys = KeyOracle::in_memory();
    let gateway = Capability::issue(Role::Gateway);
    let defender = Capability::issue(Role::Defender);

    models.store_model(
        &gateway,
        &ModelDocument {
            model_id: "m001-demo".into(),
            client_id: "client-1".into(),
            cipher_texts: vec!["AAAA".into()],
            offset_cipher: "BBBB".into(),
        },
    )?;
    println!("gateway reads back {}", models.load_model(&gateway, "m001-demo")?.model_id);
    println!("defender tries models: {}", models.load_model(&defender, "m001-demo").unwrap_err());

    keys.store_key(&defender, &KeyRecord { session_id: "s1".into(), secret_key: vec![7; 8] })?;
    println!("gateway tries keys: {}", keys.load_key(&gateway, "s1").unwrap_err());
    println!("documents live under {}", dir.display());
    Ok(())
}
