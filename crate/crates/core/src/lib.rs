//! Simulator of a ledger-based federated-learning protocol in which two
//! contracts share the work of analysing encrypted client updates.
//!
//! * The [`gateway::Gateway`] stores encrypted submissions, computes encrypted
//!   cosine distances and aggregates, and never sees a secret key.
//! * The [`defender::Defender`] holds the secret key, releases only sums and
//!   multi-model aggregates, filters poisoned updates by clustering the
//!   distance scores, and pays rewards.
//! * Every decision lands in an append-only, hash-chained [`ledger::Ledger`].
//!
//! [`harness::run_scenario`] drives complete sessions on a synthetic
//! classification task with honest and adversarial clients.

pub mod clients;
pub mod defender;
pub mod density;
pub mod error;
pub mod gateway;
pub mod harness;
pub mod ledger;
pub mod oracle;
pub mod rng;
pub mod task;
pub mod wire;

pub use error::{Error, ProtocolError, Result};
