//! Level-k policy training and multi-agent simulation.
//!
//! The crate trains stochastic agent policies at successive levels of
//! strategic reasoning: every agent except one ego learner runs a frozen
//! level-`i` policy, and the ego's learned best response becomes level
//! `i + 1`. Three learners share a discrete state/action interface
//! ([`rl`]): tabular Q-learning, an average-reward POMDP learner with
//! eligibility traces, and neural fitted Q iteration.
//!
//! Two simulated domains are provided: a 2D hybrid airspace with
//! sense-and-avoid equipped unmanned aircraft ([`airspace`]) and a
//! multi-lane highway ([`traffic`]). [`harness`] runs seeded Monte Carlo
//! studies and [`validation`] compares learned policies against recorded
//! trajectories with a discrete Kolmogorov-Smirnov test.

pub mod airspace;
pub mod error;
pub mod harness;
pub mod io;
pub mod levelk;
pub mod rl;
pub mod traffic;
pub mod validation;

pub use error::{Error, Result};

/// Seeded generator used for every stochastic component.
pub type SimRng = rand_chacha::ChaCha8Rng;

/// Build the crate's deterministic generator from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SimRng {
    use rand::SeedableRng;
    SimRng::seed_from_u64(seed)
}

/// SplitMix64 finalizer; used to derive independent sub-seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
