//! Encrypt two vectors, add, multiply, rotate and sum their slots.

use ckks::{CkksContext, HeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> ckks::Result<()> {
    let ctx = CkksContext::new(HeParams::with_degree(4096)?)?;
    let keys = ctx.keygen(1);
    let mut rng = ChaCha20Rng::seed_from_u64(2);

    let x = [1.5, -2.0, 3.25, 0.5];
    let y = [2.0, 4.0, -1.0, 8.0];
    let cx = ctx.encrypt(&x, &keys.public_key, &mut rng)?;
    let cy = ctx.encrypt(&y, &keys.public_key, &mut rng)?;

    let show = |label: &str, v: Vec<f64>| println!("{label:>10}: {:?}", v[..4].iter().map(|a| (a * 1e4).round() / 1e4).collect::<Vec<_>>());
    show("x", ctx.decrypt(&cx, &keys.secret_key)?);
    show("x + y", ctx.decrypt(&ctx.add(&cx, &cy)?, &keys.secret_key)?);
    show("x * y", ctx.decrypt(&ctx.multiply(&cx, &cy, &keys.relin_key)?, &keys.secret_key)?);
    show("rotate 1", ctx.decrypt(&ctx.rotate(&cx, 1, &keys.galois_keys)?, &keys.secret_key)?);
    show("sum", ctx.decrypt(&ctx.sum_slots(&cx, &keys.galois_keys)?, &keys.secret_key)?);

    let wire = cx.to_base64();
    println!("ciphertext at level {} serializes to {} base64 chars", cx.level(), wire.len());
    Ok(())
}
