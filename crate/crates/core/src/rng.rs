//! Per-trajectory random streams.
//!
//! Trajectory `i` of a run seeded with `root_seed` always draws from ChaCha8
//! stream `i` of that seed, so results do not depend on how trajectories are
//! scheduled across workers.

use rand::RngCore;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct RngStream {
    root_seed: u64,
    trajectory_index: u64,
    inner: ChaCha8Rng,
}

impl RngStream {
    pub fn new(root_seed: u64, trajectory_index: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(root_seed);
        inner.set_stream(trajectory_index);
        Self {
            root_seed,
            trajectory_index,
            inner,
        }
    }

    pub fn root_seed(&self) -> u64 {
        self.root_seed
    }

    pub fn trajectory_index(&self) -> u64 {
        self.trajectory_index
    }
}

impl RngCore for RngStream {
    #[inline]
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    #[inline]
    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}
