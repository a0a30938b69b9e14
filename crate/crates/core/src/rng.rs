//! Deterministic random-stream derivation.
//!
//! All randomness in a run flows from one master seed. Each consumer draws
//! from a named substream addressed by `(domain, realization, inner)`, so
//! results are bit-identical regardless of evaluation order or thread count.

use crate::C64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Independent randomness domains within one experiment run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamDomain {
    /// Channel tap angles and phases.
    Channel,
    /// Payload symbol draws.
    Symbols,
    /// Receiver thermal noise.
    Noise,
    /// Monte-Carlo covariance estimation draws.
    McCovariance,
}

impl StreamDomain {
    fn tag(self) -> u64 {
        match self {
            StreamDomain::Channel => 0x6368616e, // "chan"
            StreamDomain::Symbols => 0x73796d62, // "symb"
            StreamDomain::Noise => 0x6e6f6973,   // "nois"
            StreamDomain::McCovariance => 0x6d63636f, // "mcco"
        }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Derives the ChaCha stream for `(master, domain, realization, inner)`.
pub fn substream(master: u64, domain: StreamDomain, realization: u64, inner: u64) -> ChaCha8Rng {
    let mut state = master;
    for word in [domain.tag(), realization, inner] {
        state ^= word.wrapping_mul(0x2545f4914f6cdd1d);
        splitmix64(&mut state);
    }
    let mut seed = [0u8; 32];
    for chunk in seed.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha8Rng::from_seed(seed)
}

/// One circularly-symmetric complex Gaussian sample with unit variance
/// (`E|z|^2 = 1`).
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}
