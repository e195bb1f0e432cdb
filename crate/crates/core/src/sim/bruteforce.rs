use std::time::Duration;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::key::{KeyNumber, KEY_SPACE};
use crate::protocol::{enter_key_in_session, EntryError, LoginEndpoint, SessionStart, SessionStatus};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GuessOrder {
    /// 0000, 0001, ... 9999.
    Sequential,
    /// A uniformly random permutation of the key space.
    Shuffled,
}

/// When to give up. `None` means unbounded on that axis.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct AttackBudget {
    /// Stop on reaching this many lockouts.
    pub max_windows: Option<u32>,
    pub max_attempts: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AttackReport {
    pub attempts: u64,
    pub lockouts_hit: u32,
    pub success: bool,
    pub found: Option<KeyNumber>,
    /// Model time spent waiting out lockouts.
    pub elapsed_model_time: Duration,
    /// Largest number of verifications observed between two lockouts.
    pub max_attempts_per_window: u64,
}

/// Drives key guesses through the click API until one succeeds or the
/// budget runs out. Each guess is one full session of four clicks.
pub fn bruteforce_attack<E: LoginEndpoint, R: Rng + ?Sized>(
    endpoint: &mut E,
    username: &str,
    order: GuessOrder,
    budget: AttackBudget,
    rng: &mut R,
) -> Result<AttackReport, EntryError<E::Error>> {
    let mut guesses: Vec<u32> = (0..KEY_SPACE).collect();
    if order == GuessOrder::Shuffled {
        guesses.shuffle(rng);
    }

    let mut report = AttackReport {
        attempts: 0,
        lockouts_hit: 0,
        success: false,
        found: None,
        elapsed_model_time: Duration::ZERO,
        max_attempts_per_window: 0,
    };
    let mut in_window = 0u64;

    'guesses: for value in guesses {
        if budget.max_attempts.is_some_and(|m| report.attempts >= m) {
            break;
        }
        let session = loop {
            match endpoint.start_session(username).map_err(EntryError::Endpoint)? {
                SessionStart::Started(s) => break s,
                SessionStart::Locked { retry_after_secs } => {
                    report.lockouts_hit += 1;
                    report.max_attempts_per_window = report.max_attempts_per_window.max(in_window);
                    in_window = 0;
                    if budget.max_windows.is_some_and(|w| report.lockouts_hit >= w) {
                        break 'guesses;
                    }
                    let wait = Duration::from_secs(retry_after_secs.max(1));
                    if !endpoint.wait(wait).map_err(EntryError::Endpoint)? {
                        break 'guesses;
                    }
                    report.elapsed_model_time += wait;
                }
            }
        };
        let guess = KeyNumber::from_value(value).expect("value below key space");
        let status = enter_key_in_session(endpoint, session, guess)?;
        report.attempts += 1;
        in_window += 1;
        match status {
            SessionStatus::Succeeded => {
                report.success = true;
                report.found = Some(guess);
                break;
            }
            SessionStatus::Failed => {}
            other => return Err(EntryError::Protocol(format!("guess ended as {other:?}"))),
        }
    }
    report.max_attempts_per_window = report.max_attempts_per_window.max(in_window);
    Ok(report)
}

/// Chance that a search without repeats hits one of `accepted_keys` distinct
/// accepted values within `windows` lockout windows of `threshold` guesses.
///
/// With one accepted value this is `min(1, threshold * windows / 10000)`.
/// The login check accepts both the stored key and its shifted form for the
/// current day, so against the live service `accepted_keys` is 2 and the
/// chance is `1 - C(10000 - 2, n) / C(10000, n)` for `n` guesses, close to
/// twice the single-key figure.
pub fn exhaustive_success_probability(windows: u32, threshold: u32, accepted_keys: u32) -> f64 {
    hit_probability(u64::from(KEY_SPACE), u64::from(windows) * u64::from(threshold), accepted_keys)
}

fn hit_probability(space: u64, guesses: u64, accepted_keys: u32) -> f64 {
    let space = space as f64;
    let guesses = (guesses as f64).min(space);
    let miss: f64 =
        (0..accepted_keys).map(|i| ((space - guesses - f64::from(i)) / (space - f64::from(i))).max(0.0)).product();
    1.0 - miss
}

/// Model time needed to try the whole key space when only `threshold`
/// guesses fit in each `window`.
pub fn expected_exhaustive_time(threshold: u32, window: Duration) -> Duration {
    let windows = KEY_SPACE.div_ceil(threshold.max(1));
    window * windows
}
