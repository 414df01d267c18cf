//! Deterministic random number generation.
//!
//! All sampled values in this crate come from SplitMix64 streams. Substreams
//! are derived by folding tag words into the mix function, so every utterance,
//! parameter tensor, and epoch shuffle owns an independent stream keyed by
//! `(seed, tags...)`. Insertion order therefore never changes what any single
//! stream produces.
//!
//! Normal variates use the Box-Muller transform over the SplitMix64 uniform
//! output. Both algorithms are fixed-point integer/float arithmetic with no
//! platform-dependent behavior, so identical seeds give bit-identical values
//! everywhere.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// SplitMix64 generator.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Derive a generator from a seed and a list of tag words. Folding each
    /// word through the mix function keys the stream by the full tuple.
    pub fn from_tags(seed: u64, tags: &[u64]) -> Self {
        let mut state = mix64(seed);
        for &tag in tags {
            state = mix64(state ^ tag.wrapping_mul(GOLDEN_GAMMA));
        }
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform in [0, 1) with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in (0, 1]; safe as a logarithm argument.
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in [lo, hi] inclusive.
    pub fn next_range(&mut self, lo: usize, hi: usize) -> usize {
        debug_assert!(lo <= hi);
        let span = (hi - lo + 1) as f64;
        lo + (self.next_f64() * span) as usize
    }

    /// Standard normal via Box-Muller. Consumes two uniforms per pair; the
    /// second variate of each pair is cached by [`NormalSource`].
    fn next_normal_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = 2.0 * std::f64::consts::PI * u2;
        (radius * angle.cos(), radius * angle.sin())
    }
}

/// Standard-normal sampler over a SplitMix64 stream.
#[derive(Debug, Clone)]
pub struct NormalSource {
    rng: SplitMix64,
    spare: Option<f64>,
}

impl NormalSource {
    pub fn new(rng: SplitMix64) -> Self {
        NormalSource { rng, spare: None }
    }

    pub fn from_tags(seed: u64, tags: &[u64]) -> Self {
        NormalSource::new(SplitMix64::from_tags(seed, tags))
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let (z0, z1) = self.rng.next_normal_pair();
        self.spare = Some(z1);
        z0
    }

    /// Access the underlying uniform stream. Draining uniforms discards any
    /// cached spare normal so the draw order stays well defined.
    pub fn uniform(&mut self) -> &mut SplitMix64 {
        self.spare = None;
        &mut self.rng
    }
}

/// FNV-1a hash of a name, used to key per-tensor initialization streams.
pub fn name_tag(name: &str) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for byte in name.as_bytes() {
        hash ^= u64::from(*byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Deterministic Fisher-Yates permutation of `0..n`.
pub fn permutation(rng: &mut SplitMix64, n: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.next_range(0, i);
        order.swap(i, j);
    }
    order
}
