//! Counter-based random substreams.
//!
//! Every path owns one ChaCha8 stream per random component. The key is
//! derived from `(root seed, component)` and the path index selects the
//! ChaCha stream, so a path's draws never depend on how work is scheduled.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Which random ingredient a substream feeds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Component {
    /// Brownian increments of the two factors.
    Brownian = 1,
    /// Unit-rate arrival clock and claim sizes.
    Claims = 2,
    /// Unit exponential default threshold.
    Threshold = 3,
    /// Random initial states for regression batches.
    Start = 4,
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Independent stream for `(seed, component, index)`.
pub fn substream(seed: u64, component: Component, index: u64) -> ChaCha8Rng {
    let mut state = seed ^ (component as u64).wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(index);
    rng
}
