//! Seed splitting: one master seed, one independent ChaCha stream per task.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Expands a master seed into per-task generators keyed by a counter, so
/// results do not depend on the order in which tasks run.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SeedSplitter {
    master: u64,
}

impl SeedSplitter {
    pub fn new(master: u64) -> Self {
        Self { master }
    }

    pub fn master(&self) -> u64 {
        self.master
    }

    pub fn stream(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(index);
        rng
    }

    /// A child splitter for a nested family of tasks.
    pub fn child(&self, index: u64) -> SeedSplitter {
        use rand::Rng;
        SeedSplitter::new(self.stream(index).random())
    }
}
