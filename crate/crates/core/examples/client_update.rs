//! One client's round: local training, offset, chunked encryption.

use chainfl::clients::{encrypt_update, generate_offset, partition_non_iid, train_local, AttackConfig, Behavior, TrainConfig};
use chainfl::harness::pretrain_global;
use chainfl::task::{backdoor_accuracy, main_accuracy, Model, TaskSize, ToyTask, TARGET_CLASS, TRIGGER_FEATURES};
use ckks::{CkksContext, HeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let task = ToyTask::generate(1, TaskSize::default());
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    let parts = partition_non_iid(&task.train, 10, 0.7, 100, &mut rng);
    // the session owner's starting model, trained on the small public set
    let global = Model::from_weights(pretrain_global(&task, 5, 0.1, 20, 1));
    let cfg = TrainConfig::default();

    let honest = train_local(&parts[3], &global.weights, &Behavior::Honest, &cfg, 4)?;
    let attack = AttackConfig::default();
    let poisoned = train_local(
        &parts[4],
        &global.weights,
        &Behavior::Malicious { attack: &attack, trigger: &TRIGGER_FEATURES },
        &cfg,
        5,
    )?;
    // a single non-IID client drifts hard toward its home class; only the
    // average over many clients keeps the global model accurate
    for (name, m) in [("global", &global), ("honest", &honest), ("poisoned", &poisoned)] {
        println!(
            "{name:>8}: MA {:.3}, BA {:.3}",
            main_accuracy(m, &task.test).unwrap_or(0.0),
            backdoor_accuracy(m, &task.test, &TRIGGER_FEATURES, TARGET_CLASS).unwrap_or(0.0)
        );
    }

    let ctx = CkksContext::new(HeParams::with_levels(2048, 2)?)?;
    let keys = ctx.keygen(6);
    let offset = generate_offset(&honest.weights, 0.1, &mut rng)?;
    let enc = encrypt_update(&honest.weights, &offset, &ctx, &keys.public_key, &mut rng)?;
    println!(
        "{} weights -> {} ciphertexts of {} slots; sigma_W {:.4}, f_s {:.4}, delta {:.5}",
        honest.weights.len(),
        enc.chunks.len(),
        ctx.slot_count(),
        offset.sigma_w,
        offset.f_s,
        offset.delta
    );
    Ok(())
}
