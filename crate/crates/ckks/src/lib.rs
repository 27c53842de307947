//! Approximate homomorphic encryption over `Z[X]/(X^N + 1)` with real-valued slots.
//!
//! The engine supports the operations needed for encrypted dot products and
//! averaging: encode/encrypt, addition, one level of ciphertext
//! multiplication per prime with rescaling, plaintext masking, slot rotation
//! and all-slot summation. Parameters are chosen for accuracy and speed at
//! desk scale, not for any cryptographic security level.
//!
//! ```
//! use ckks::{CkksContext, HeParams};
//! use rand::SeedableRng;
//!
//! let ctx = CkksContext::new(HeParams::with_degree(1024).unwrap()).unwrap();
//! let keys = ctx.keygen(1);
//! let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(0);
//! let a = ctx.encrypt(&[1.0, 2.0, 3.0], &keys.public_key, &mut rng).unwrap();
//! let summed = ctx.sum_slots(&a, &keys.galois_keys).unwrap();
//! let out = ctx.decrypt(&summed, &keys.secret_key).unwrap();
//! assert!((out[17] - 6.0).abs() < 1e-3);
//! ```

mod arith;
mod ciphertext;
mod codec;
mod context;
mod encoding;
mod error;
mod keys;
mod params;
mod ring;

pub use ciphertext::Ciphertext;
pub use context::CkksContext;
pub use encoding::Encoder;
pub use error::{HeError, Result};
pub use keys::{EvaluationKeys, GaloisKeys, KeyMaterial, PublicKey, RelinKey, SecretKey};
pub use params::{cipher_count, HeParams, MIN_POLY_DEGREE};
