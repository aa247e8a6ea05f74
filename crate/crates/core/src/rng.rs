//! Seed derivation for the independent random streams of a run.
//!
//! Every consumer (mapping, MAC backoff, channel, each traffic source, frame
//! sizes) gets its own generator so that draws in one never shift another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator type used throughout the simulator.
pub type SimRng = ChaCha8Rng;

/// Fixed labels for the per-run random streams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamLabel {
    Mapping,
    Mac,
    Channel,
    FrameSizes,
    Source(u32),
    /// MAC of a competing station.
    Station(u32),
}

impl StreamLabel {
    fn tag(self) -> u64 {
        match self {
            StreamLabel::Mapping => 0x6d61_7070,
            StreamLabel::Mac => 0x6d61_6321,
            StreamLabel::Channel => 0x6368_616e,
            StreamLabel::FrameSizes => 0x7369_7a65,
            StreamLabel::Source(i) => 0x7372_6300_0000_0000 | u64::from(i),
            StreamLabel::Station(i) => 0x7374_6100_0000_0000 | u64::from(i),
        }
    }
}

/// One round of the splitmix64 output function.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(run_seed: u64, label: StreamLabel) -> u64 {
    splitmix64(splitmix64(run_seed) ^ label.tag())
}

pub fn stream(run_seed: u64, label: StreamLabel) -> SimRng {
    SimRng::seed_from_u64(derive_seed(run_seed, label))
}
