#![allow(dead_code)]

use std::sync::Arc;

use chainfl::clients::{encrypt_update, EncryptedModel, Offset};
use chainfl::defender::{DecryptionService, Defender};
use chainfl::gateway::Gateway;
use chainfl::ledger::{Ledger, SharedLedger};
use chainfl::oracle::{KeyOracle, ModelOracle};
use ckks::HeParams;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

pub struct Fixture {
    pub ledger: SharedLedger,
    pub defender: Arc<Defender>,
    pub gateway: Gateway,
}

impl Fixture {
    pub fn new(seed: u64) -> Self {
        let ledger = Ledger::new().shared();
        let defender = Arc::new(Defender::new(ledger.clone(), KeyOracle::in_memory()));
        let gateway = Gateway::new(
            ledger.clone(),
            ModelOracle::in_memory(),
            defender.clone() as Arc<dyn DecryptionService>,
            seed,
        );
        Fixture { ledger, defender, gateway }
    }

    pub fn open(&self, rounds: u32, reward: f64, degree: usize, initial: &[f64]) -> String {
        let params = HeParams::with_levels(degree, 2).unwrap();
        self.gateway.init_session("owner", rounds, reward, &params, initial, 7).unwrap()
    }

    pub fn clients(&self, n: usize) -> Vec<String> {
        let mut ledger = self.ledger.write().unwrap();
        (0..n)
            .map(|k| ledger.register_client(&format!("wallet-{k}")).unwrap().client_id)
            .collect()
    }

    pub fn encrypt(&self, session: &str, weights: &[f64], delta: f64, seed: u64) -> EncryptedModel {
        let s = self.gateway.session(session).unwrap();
        let offset = Offset {
            delta,
            f_s: 1.0,
            sigma_w: delta,
            degenerate: false,
        };
        encrypt_update(
            weights,
            &offset,
            &s.ctx,
            &s.keys.public_key,
            &mut ChaCha20Rng::seed_from_u64(seed),
        )
        .unwrap()
    }

    pub fn submit(&self, session: &str, client: &str, weights: &[f64], delta: f64, seed: u64) -> String {
        let m = self.encrypt(session, weights, delta, seed);
        self.gateway.model_process(session, &m, client).unwrap()
    }
}

pub fn plain_cosine_distance(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    1.0 - dot / (na * nb)
}
