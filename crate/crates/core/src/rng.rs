//! Deterministic counter-style random streams.
//!
//! Everything stochastic in this crate draws from [`Stream`], a SplitMix64
//! generator. The i-th output is a pure function of (seed, i), and child
//! streams are derived as `Stream::new(derive_seed(seed, stream_id))`, so
//! per-key, per-replicate, and per-shot streams can be evaluated in any
//! order (or in parallel) without changing a single byte of output.
//!
//! Not cryptographically secure; for reproducible simulation only.

/// SplitMix64 increment (golden-ratio constant).
const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer. Bijective on `u64`.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive a child seed for an identified sub-stream: `mix64(seed ^ mix64(id + 1))`.
///
/// Distinct ids give distinct, well-separated child seeds for the same
/// parent seed. The `+ 1` keeps id 0 away from the `mix64(0) = 0` fixed point.
#[inline]
pub fn derive_seed(seed: u64, stream_id: u64) -> u64 {
    mix64(seed ^ mix64(stream_id.wrapping_add(1)))
}

/// A deterministic SplitMix64 stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Stream {
    state: u64,
}

impl Stream {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Child stream for `stream_id`; see [`derive_seed`].
    pub fn derived(seed: u64, stream_id: u64) -> Self {
        Self::new(derive_seed(seed, stream_id))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN);
        mix64(self.state)
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[0, n)`. `n` must be nonzero.
    #[inline]
    pub fn next_index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        (self.next_u64() % n as u64) as usize
    }

    /// In-place Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.next_index(i + 1);
            xs.swap(i, j);
        }
    }
}
