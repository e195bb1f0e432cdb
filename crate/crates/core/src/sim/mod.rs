//! Monte-Carlo evaluation of shoulder-surfing and brute-force resistance.
//!
//! The observer models are a formalisation of what a shoulder surfer retains
//! from watching a login, not a model of human perception.

mod bruteforce;
mod observer;
mod report;

pub use bruteforce::{
    bruteforce_attack, exhaustive_success_probability, expected_exhaustive_time, AttackBudget, AttackReport, GuessOrder,
};
pub use observer::{observer_attack, run_observer_trials, simulate_login_trace, LoginTrace, ObserverModel, TraceStep};
pub use report::{to_csv, to_text, wilson_interval, SummaryRow, CSV_HEADER};

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Entropy stream for trial `index` of an experiment seeded with `seed`.
/// Independent of scheduling, so parallel runs are reproducible.
pub fn trial_rng(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
