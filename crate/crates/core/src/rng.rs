// SPDX-License-Identifier: MIT OR Apache-2.0

//! Reproducible random streams.
//!
//! Every Monte Carlo loop derives its generators from one master seed with
//! [`stream_rng`]: the master seed keys a ChaCha8 generator and the stream id
//! selects one of its 2^64 independent streams. Replication `r` of an
//! experiment always draws from stream `r`, whatever the thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream_rng(master: u64, stream: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(stream);
    rng
}

/// Mixes a tag into a master seed (splitmix64 finalizer), for nested streams.
pub fn derive_seed(master: u64, tag: u64) -> u64 {
    let mut z = master ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
