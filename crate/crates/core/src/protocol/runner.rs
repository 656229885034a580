//! Independent trials with per-trial random streams.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::engine::{run_trial, TrialRecord};
use super::{ProtocolConfig, ProtocolError};

/// Random stream of trial `index`: the master seed picks the key, the trial
/// index picks the stream.
pub fn trial_rng(master_seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(index);
    rng
}

/// Runs `trials` trials; the result is ordered by trial index and does not
/// depend on the number of worker threads.
pub fn run_trials(config: &ProtocolConfig, trials: u64, master_seed: u64) -> Result<Vec<TrialRecord>, ProtocolError> {
    config.validate()?;
    let one = |i: u64| run_trial(config, i, &mut trial_rng(master_seed, i));
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..trials).into_par_iter().map(one).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..trials).map(one).collect()
    }
}
