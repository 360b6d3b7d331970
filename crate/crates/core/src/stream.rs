//! Deterministic random streams, one per protocol role.
//!
//! Every stream is a ChaCha8 generator keyed by the master seed, with the
//! role selecting the ChaCha stream id. Same `(seed, role)` gives the same
//! sequence; distinct roles give independent sequences.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Role {
    Source,
    RandA,
    RandB,
    StationX,
    StationY,
    Tautology,
}

impl Role {
    pub const ALL: [Role; 6] = [
        Role::Source,
        Role::RandA,
        Role::RandB,
        Role::StationX,
        Role::StationY,
        Role::Tautology,
    ];

    fn stream_id(self) -> u64 {
        // Arbitrary fixed constants; changing them changes every log.
        match self {
            Role::Source => 0x4f53_5243,
            Role::RandA => 0x5241_4e41,
            Role::RandB => 0x5241_4e42,
            Role::StationX => 0x5354_4e58,
            Role::StationY => 0x5354_4e59,
            Role::Tautology => 0x5441_5554,
        }
    }
}

#[derive(Clone, Debug)]
pub struct RandomStream {
    role: Role,
    rng: ChaCha8Rng,
}

pub fn derive_stream(master_seed: u64, role: Role) -> RandomStream {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(role.stream_id());
    RandomStream { role, rng }
}

impl RandomStream {
    pub fn role(&self) -> Role {
        self.role
    }

    /// Uniform draw in `[0, 1)` with 53 bits of resolution.
    pub fn next_uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Fair coin.
    pub fn next_bool(&mut self) -> bool {
        self.next_uniform() < 0.5
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}
