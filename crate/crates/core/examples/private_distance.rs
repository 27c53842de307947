//! Cosine distance between a client model and the global model, computed by
//! the gateway on ciphertexts with the defender decrypting only sums.

use std::sync::Arc;

use chainfl::clients::{encrypt_update, generate_offset};
use chainfl::defender::{DecryptionService, Defender};
use chainfl::gateway::Gateway;
use chainfl::ledger::Ledger;
use chainfl::oracle::{KeyOracle, ModelOracle};
use ckks::HeParams;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ledger = Ledger::new().shared();
    let defender = Arc::new(Defender::new(ledger.clone(), KeyOracle::in_memory()));
    let gateway = Gateway::new(ledger.clone(), ModelOracle::in_memory(), defender as Arc<dyn DecryptionService>, 1);

    let mut rng = ChaCha20Rng::seed_from_u64(3);
    let global: Vec<f64> = (0..3000).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let local: Vec<f64> = global.iter().map(|g| g + rng.gen_range(-0.4..0.4)).collect();

    let session_id = gateway.init_session("owner", 1, 100.0, &HeParams::with_levels(2048, 2)?, &global, 9)?;
    let client = ledger.write().unwrap().register_client("wallet-1")?.client_id;
    let session = gateway.session(&session_id)?;
    let offset = generate_offset(&local, 0.1, &mut rng)?;
    let enc = encrypt_update(&local, &offset, &session.ctx, &session.keys.public_key, &mut rng)?;
    let model_id = gateway.model_process(&session_id, &enc, &client)?;
    println!("stored {model_id} as {} ciphertexts", enc.chunks.len());

    let private = gateway.private_cosine_distance(&session_id, &model_id)?;
    let shift = |v: &[f64]| v.iter().map(|x| x + offset.delta).collect::<Vec<f64>>();
    let (g, w) = (shift(&global), shift(&local));
    let dot: f64 = g.iter().zip(&w).map(|(a, b)| a * b).sum();
    let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
    let plain = 1.0 - dot / (norm(&g) * norm(&w));
    println!("encrypted distance {private:.6}, plaintext {plain:.6}, offset {:.4}", offset.delta);
    Ok(())
}
