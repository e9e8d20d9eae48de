/// Independent random streams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedStream {
    /// Layout generation and respawns of an episode.
    Environment = 1,
    /// Action noise of the acting networks.
    ActionNoise = 2,
    /// Minibatch shuffling.
    Shuffle = 3,
    /// Deterministic evaluation episodes.
    Evaluation = 4,
    /// Network initialization.
    Init = 5,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for `(master, epoch, index, stream)`; independent of scheduling.
pub fn derive_seed(master: u64, epoch: u64, index: u64, stream: SeedStream) -> u64 {
    [epoch, index, stream as u64]
        .into_iter()
        .fold(splitmix64(master), |acc, part| {
            splitmix64(acc ^ splitmix64(part))
        })
}
