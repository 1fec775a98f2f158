//! Deterministic seed derivation.
//!
//! Every random decision in the pipeline flows from a single master seed.
//! Sub-tasks (per-condition dataset synthesis, shuffling, weight init)
//! derive their own seeds from the master plus fixed tags, so parallel and
//! serial runs draw identical streams.

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mix a master seed with a sequence of tags into a new seed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(master);
    for &tag in tags {
        state = splitmix64(state ^ splitmix64(tag));
    }
    state
}

/// One master seed from OS entropy, for runs that did not specify one.
pub fn entropy_seed() -> u64 {
    use rand::Rng;
    rand::rng().random()
}
