//! Loss, time-multiplexed click detection and efficiency calibration.
//!
//! Exact click probabilities come from the probability generating function of
//! the incident statistics; sampled tallies come from a seeded Monte Carlo
//! that splits trials into fixed partitions, so results do not depend on the
//! number of worker threads.

mod klyshko;
mod loss;
mod sampling;
mod tmd;

pub use klyshko::{klyshko_efficiency, KlyshkoEstimate, TwinBeamConfig};
pub use loss::{apply_loss, LossChannel};
pub use sampling::{estimate_g_from_counts, estimate_mean, tmd_sample, ClickCounts, SampledMoment, SubsetTally};
pub use tmd::{tmd_click_joint, tmd_estimate_g, TmdConfig, MAX_BINS};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Trials per Monte Carlo partition.
pub(crate) const PARTITION_TRIALS: u64 = 1 << 16;

/// Generator for one partition; the stream index keeps partitions independent.
pub(crate) fn partition_rng(seed: u64, partition: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(partition);
    rng
}

pub(crate) fn partitions(trials: u64) -> impl Iterator<Item = (u64, u64)> {
    let count = trials.div_ceil(PARTITION_TRIALS);
    (0..count).map(move |p| {
        let start = p * PARTITION_TRIALS;
        (p, PARTITION_TRIALS.min(trials - start))
    })
}
