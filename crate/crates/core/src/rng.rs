//! Counter-based SplitMix64 generator.
//!
//! Output `i` of a stream depends only on `(seed, i)`, so samples can be
//! drawn in any order or in parallel and still match across platforms.

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitMix64 {
    seed: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    /// The `counter`-th 64-bit output of this stream.
    #[inline]
    pub fn u64_at(&self, counter: u64) -> u64 {
        mix(self
            .seed
            .wrapping_add(counter.wrapping_add(1).wrapping_mul(GAMMA)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn f64_at(&self, counter: u64) -> f64 {
        (self.u64_at(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Independent child stream, e.g. one per object or per threshold.
    pub fn derive(&self, stream: u64) -> SplitMix64 {
        SplitMix64::new(mix(self.seed ^ mix(stream.wrapping_add(GAMMA))))
    }
}

/// Sequential convenience wrapper over [`SplitMix64`].
#[derive(Debug, Clone)]
pub struct SeqRng {
    gen: SplitMix64,
    counter: u64,
}

impl SeqRng {
    pub fn new(seed: u64) -> Self {
        Self {
            gen: SplitMix64::new(seed),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.gen.u64_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn next_f64(&mut self) -> f64 {
        let v = self.gen.f64_at(self.counter);
        self.counter += 1;
        v
    }

    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }
}
