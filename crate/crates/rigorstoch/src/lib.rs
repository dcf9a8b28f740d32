//! Validated computable probability.
//!
//! The library computes with probability the way a proof does: measures are
//! valuations giving certified lower bounds on open sets, random variables
//! are effective Cauchy sequences of continuous functions on Cantor space,
//! and every numeric answer is an enclosure. On top of that substrate sit a
//! Markov-chain push-forward engine, a certified Wiener-process sampler, the
//! Ito integral for step processes, and a Picard-contraction SDE solver whose
//! error bounds are machine-checkable rationals.

pub mod error;
pub mod exactnum;
pub mod expr;
pub mod fint;
pub mod ito;
pub mod markov;
pub mod randvar;
pub mod sde;
pub mod space;
pub mod stats;
pub mod valuation;
pub mod wiener;

pub use error::{Error, ErrorKind, Result};

/// Configures the global worker pool for ensemble loops. Call before any
/// parallel work; later calls fail harmlessly.
pub fn build_thread_pool(threads: usize) -> std::result::Result<(), String> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| e.to_string())
}
