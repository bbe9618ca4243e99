//! Seed derivation and generator pinning.
//!
//! All randomness in a run is drawn from named sub-streams of a single
//! master seed, so the random choices made for population initialization,
//! pair selection, diffusion noise, and tie-breaking are mutually
//! independent and individually reproducible. Changing how one stream is
//! consumed (say, sampling more diffusion noise) leaves the others intact.
//!
//! The generator is ChaCha12 with its 32-byte seed laid out as four
//! little-endian u64 words `[master, stream, a, b]`. Distinct words give
//! statistically independent streams; `a` and `b` are zero for the
//! per-stream generators and carry (step, particle) for the per-particle
//! diffusion generators, which makes the SDE noise independent of how
//! particles are distributed over threads. The crate versions are pinned in
//! Cargo.toml because any change to the generator or to this layout changes
//! every sampled trajectory.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The generator used everywhere this crate consumes randomness.
pub type SimRng = ChaCha12Rng;

/// Named randomness consumers within a run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Stream {
    /// Initial agent priors / particle positions.
    PopulationInit = 1,
    /// Which pair of agents plays each round.
    Pairing = 2,
    /// Diffusion noise in the SDE integrator.
    Diffusion = 3,
    /// Reserved for randomized tie rules (the uniform tie rule is a
    /// stateless hash and does not draw from it).
    TieBreak = 4,
    /// Monte Carlo reference computations in tests and benches.
    Oracle = 5,
}

fn seed_bytes(words: [u64; 4]) -> [u8; 32] {
    let mut bytes = [0u8; 32];
    for (chunk, word) in bytes.chunks_exact_mut(8).zip(words) {
        chunk.copy_from_slice(&word.to_le_bytes());
    }
    bytes
}

/// Generator for one named sub-stream of `master`.
pub fn substream(master: u64, stream: Stream) -> SimRng {
    SimRng::from_seed(seed_bytes([master, stream as u64, 0, 0]))
}

/// Generator for the diffusion noise of one particle at one step.
///
/// Seeding per (step, particle) rather than drawing from a shared stream
/// keeps the noise identical under any execution order.
pub fn particle_rng(master: u64, step: u64, particle: u64) -> SimRng {
    SimRng::from_seed(seed_bytes([master, Stream::Diffusion as u64, step, particle]))
}

/// SplitMix64 finalizer, used to hash belief bits for the uniform tie rule.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
