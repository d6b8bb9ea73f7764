//! Deterministic, splittable random streams.
//!
//! Every stochastic component of the toolkit (symbol draws, channel noise,
//! dropout masks, shuffles, Monte-Carlo trials) pulls from an [`RngStream`].
//! A stream is a pure function of its 64-bit key and a draw counter, so the
//! n-th draw never depends on how many threads produced draws 0..n-1.
//! Substreams are derived by re-keying, which makes per-frame and per-trial
//! generation embarrassingly parallel with a result identical to the
//! sequential one.

use std::f64::consts::TAU;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;
const SUBSTREAM_TAG: u64 = 0x53_55_42; // "SUB"

/// SplitMix64 finalizer: a full-avalanche 64-bit mix.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-based random stream: draw `j` is `mix(key + GOLDEN * j)`.
#[derive(Debug, Clone)]
pub struct RngStream {
    key: u64,
    counter: u64,
    gauss_spare: Option<f64>,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        RngStream {
            key: mix(seed ^ GOLDEN),
            counter: 0,
            gauss_spare: None,
        }
    }

    /// Derive the `index`-th child stream. Children are independent of the
    /// parent's draw position and of each other.
    pub fn substream(&self, index: u64) -> Self {
        let key = mix(mix(self.key ^ SUBSTREAM_TAG).wrapping_add(GOLDEN.wrapping_mul(index)));
        RngStream {
            key,
            counter: 0,
            gauss_spare: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.counter = self.counter.wrapping_add(1);
        mix(self.key.wrapping_add(GOLDEN.wrapping_mul(self.counter)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `(0, 1]`; safe as a log argument.
    #[inline]
    pub fn next_f64_open(&mut self) -> f64 {
        ((self.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Bias is O(n / 2^64), irrelevant here.
    #[inline]
    pub fn next_below(&mut self, n: u64) -> u64 {
        debug_assert!(n > 0);
        ((self.next_u64() as u128 * n as u128) >> 64) as u64
    }

    /// Two independent standard normal draws (Box-Muller).
    #[inline]
    pub fn next_gaussian_pair(&mut self) -> (f64, f64) {
        let u1 = self.next_f64_open();
        let u2 = self.next_f64();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = TAU * u2;
        (r * libm::cos(theta), r * libm::sin(theta))
    }

    /// One standard normal draw; pairs are cached so consecutive calls cost
    /// one Box-Muller transform per two draws.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.gauss_spare.take() {
            return z;
        }
        let (a, b) = self.next_gaussian_pair();
        self.gauss_spare = Some(b);
        a
    }

    /// Fisher-Yates shuffle driven by this stream.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_sequence() {
        let mut a = RngStream::new(42);
        let mut b = RngStream::new(42);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn different_seeds_differ() {
        let mut a = RngStream::new(1);
        let mut b = RngStream::new(2);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn substreams_are_stable_and_distinct() {
        let root = RngStream::new(7);
        let mut s0 = root.substream(0);
        let mut s0_again = root.substream(0);
        let mut s1 = root.substream(1);
        let x = s0.next_u64();
        assert_eq!(x, s0_again.next_u64());
        assert_ne!(x, s1.next_u64());
    }

    #[test]
    fn substream_independent_of_parent_position() {
        let mut parent = RngStream::new(9);
        let before = parent.substream(3);
        parent.next_u64();
        parent.next_u64();
        let after = parent.substream(3);
        assert_eq!(before.clone().next_u64(), after.clone().next_u64());
    }

    #[test]
    fn uniform_mean_and_range() {
        let mut s = RngStream::new(11);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let u = s.next_f64();
            assert!((0.0..1.0).contains(&u));
            sum += u;
        }
        let mean = sum / n as f64;
        assert!((mean - 0.5).abs() < 0.005, "mean {mean}");
    }

    #[test]
    fn gaussian_moments() {
        let mut s = RngStream::new(13);
        let n = 200_000;
        let (mut sum, mut sumsq) = (0.0, 0.0);
        for _ in 0..n {
            let z = s.next_gaussian();
            sum += z;
            sumsq += z * z;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn next_below_covers_range() {
        let mut s = RngStream::new(17);
        let mut seen = [false; 8];
        for _ in 0..1000 {
            seen[s.next_below(8) as usize] = true;
        }
        assert!(seen.iter().all(|&b| b));
    }
}
