//! Seed derivation helpers.
//!
//! SplitMix64 (Steele, Lea, Flood) is used to expand a 64-bit seed into key
//! material and to mix several integers into one independent seed. Both are a
//! few lines of integer arithmetic and reproduce exactly in any language.

const GOLDEN_GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Clone, Debug)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        finalize(self.state)
    }

    /// Uniform on `[0, 1)` from the top 53 bits.
    pub fn next_f64(&mut self) -> f64 {
        unit_f64(self.next_u64())
    }
}

fn finalize(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Maps a 64-bit word to `[0, 1)` as `(x >> 11) * 2^-53`.
pub fn unit_f64(x: u64) -> f64 {
    (x >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Folds `parts` into `seed`: `s <- splitmix_finalize(s ^ part + gamma)` per part.
pub fn derive_seed(seed: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(finalize(seed.wrapping_add(GOLDEN_GAMMA)), |s, &p| {
        finalize((s ^ p).wrapping_add(GOLDEN_GAMMA))
    })
}

/// 32-byte key for a stream cipher RNG: four consecutive SplitMix64 outputs,
/// little-endian.
pub fn expand_key(seed: u64) -> [u8; 32] {
    let mut sm = SplitMix64::new(seed);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&sm.next_u64().to_le_bytes());
    }
    key
}
