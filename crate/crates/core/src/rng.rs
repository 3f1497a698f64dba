//! Seedable PRNG shared by phantom generation, noise injection and the
//! annealer.
//!
//! The generator is xoshiro256++ seeded through SplitMix64 expansion of a
//! 64-bit seed (`SeedableRng::seed_from_u64`), so streams can be reproduced
//! outside Rust from the published reference implementations.

use rand::SeedableRng;
pub use rand_xoshiro::Xoshiro256PlusPlus as CtRng;

pub fn seeded(seed: u64) -> CtRng {
    CtRng::seed_from_u64(seed)
}
