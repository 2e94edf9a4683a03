//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream whose 256-bit key is the tuple
//! `(seed, domain, a, b)`. Distinct tuples give independent streams, so the
//! draws a node consumes never depend on which worker runs it or in what
//! order the nodes are visited.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags keeping streams for different subsystems disjoint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Domain {
    HawkesSim = 1,
    EnsembleInit = 2,
    Analysis = 3,
    Abm = 4,
    Synthetic = 5,
}

pub fn stream(seed: u64, domain: Domain, a: u64, b: u64) -> StreamRng {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(domain as u64).to_le_bytes());
    key[16..24].copy_from_slice(&a.to_le_bytes());
    key[24..32].copy_from_slice(&b.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}
