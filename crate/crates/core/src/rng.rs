//! Reproducible random streams keyed by (master seed, replication, role).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; distinct roles never share a ChaCha stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum StreamRole {
    Grains = 1,
    Rays = 2,
    Planes = 3,
    Pieces = 4,
    Points = 5,
}

/// Independent stream for replication `rep` in role `role`.
///
/// Streams depend only on their key, so the result of a replication does not
/// depend on which worker runs it or in what order.
pub fn stream_rng(seed: u64, rep: u64, role: StreamRole) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((rep << 8) | role as u64);
    rng
}
