//! SplitMix64, the only PRNG on the consensus path.
//!
//! Item memories must be bit-identical across every verifier, so the generator
//! is pinned here rather than delegated to a library whose stream could change
//! between releases.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Seeds the stream from a 32-bit mining nonce, zero-extended.
    pub fn from_nonce(nonce: u32) -> Self {
        Self::new(u64::from(nonce))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Output number `index` (0-based) of the stream seeded with `seed`,
    /// computed without stepping through the earlier outputs.
    pub fn output_at(seed: u64, index: u64) -> u64 {
        let mut rng = Self::new(seed.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index)));
        rng.next_u64()
    }

    /// Uniform index in `0..bound` by modulo reduction. `bound` must be non-zero.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        self.next_u64() % bound
    }
}

impl Iterator for SplitMix64 {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        Some(self.next_u64())
    }
}
