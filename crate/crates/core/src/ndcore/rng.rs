//! Seeded randomness.
//!
//! Every random draw goes through ChaCha8 (`rand_chacha::ChaCha8Rng`), a
//! counter-based stream cipher whose output is identical on every platform.
//! A single root seed fans out into independent streams: the generator is
//! keyed with `seed_from_u64(root)` and then moved to stream
//! `(purpose << 32) | index`, where `purpose` is the numeric tag of
//! [`Stream`] and `index` distinguishes repeated uses (e.g. the epoch).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Purpose tags for stream splitting. The numeric values are part of the
/// reproducibility contract and must not change.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    Init = 2,
    Downsample = 3,
    Noise = 4,
    Synth = 5,
    Shuffle = 6,
}

pub fn stream_rng(root: u64, purpose: Stream, index: u32) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    rng.set_stream(((purpose as u64) << 32) | index as u64);
    rng
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: u64 = stream_rng(7, Stream::Init, 0).random();
        let b: u64 = stream_rng(7, Stream::Init, 0).random();
        let c: u64 = stream_rng(7, Stream::Init, 1).random();
        let d: u64 = stream_rng(7, Stream::Noise, 0).random();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_ne!(a, d);
    }
}
