//! Persisted account records and their line encoding.
//!
//! One record per line:
//!
//! ```text
//! v1|<b64 username_ct>|<b64 key_ct>|<created_at RFC3339>|<failed_attempts>|<locked_until RFC3339 or ->
//! ```

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use chrono::{DateTime, Duration, SecondsFormat, Utc};

pub const RECORD_VERSION: &str = "v1";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UserRecord {
    pub username_ct: Vec<u8>,
    pub key_ct: Vec<u8>,
    pub created_at: DateTime<Utc>,
    pub failed_attempts: u32,
    pub locked_until: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LockState {
    Unlocked,
    Locked { until: DateTime<Utc> },
}

impl LockState {
    /// Whole seconds until the lock expires, rounded up. Zero when unlocked.
    pub fn retry_after_secs(&self, now: DateTime<Utc>) -> u64 {
        match *self {
            LockState::Unlocked => 0,
            LockState::Locked { until } => {
                let ms = (until - now).num_milliseconds().max(0) as u64;
                ms.div_ceil(1000)
            }
        }
    }
}

/// Failed-attempt threshold and the block applied on reaching it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LockoutPolicy {
    pub threshold: u32,
    pub window: Duration,
}

impl Default for LockoutPolicy {
    fn default() -> Self {
        Self { threshold: 5, window: Duration::minutes(30) }
    }
}

impl UserRecord {
    /// A user is locked while `now < locked_until`.
    pub fn lock_state(&self, now: DateTime<Utc>) -> LockState {
        match self.locked_until {
            Some(until) if now < until => LockState::Locked { until },
            _ => LockState::Unlocked,
        }
    }

    pub(crate) fn with_failure(&self, now: DateTime<Utc>, policy: &LockoutPolicy) -> UserRecord {
        let mut next = self.clone();
        if next.lock_state(now) == LockState::Unlocked {
            next.locked_until = None;
        }
        next.failed_attempts += 1;
        if next.failed_attempts >= policy.threshold {
            next.failed_attempts = 0;
            next.locked_until = Some(now + policy.window);
        }
        next
    }

    pub(crate) fn with_success(&self) -> UserRecord {
        UserRecord { failed_attempts: 0, locked_until: None, ..self.clone() }
    }

    pub fn to_line(&self) -> String {
        let locked =
            self.locked_until.map(|t| t.to_rfc3339_opts(SecondsFormat::AutoSi, true)).unwrap_or_else(|| "-".to_owned());
        format!(
            "{RECORD_VERSION}|{}|{}|{}|{}|{locked}",
            B64.encode(&self.username_ct),
            B64.encode(&self.key_ct),
            self.created_at.to_rfc3339_opts(SecondsFormat::AutoSi, true),
            self.failed_attempts,
        )
    }

    pub fn parse_line(line: &str) -> Result<UserRecord, String> {
        let fields: Vec<&str> = line.split('|').collect();
        let [version, user, key, created, failed, locked] = fields[..] else {
            return Err(format!("expected 6 fields, found {}", fields.len()));
        };
        if version != RECORD_VERSION {
            return Err(format!("unsupported record version {version:?}"));
        }
        let time = |s: &str| {
            DateTime::parse_from_rfc3339(s)
                .map(|t| t.with_timezone(&Utc))
                .map_err(|e| format!("bad timestamp {s:?}: {e}"))
        };
        Ok(UserRecord {
            username_ct: B64.decode(user).map_err(|e| format!("bad username field: {e}"))?,
            key_ct: B64.decode(key).map_err(|e| format!("bad key field: {e}"))?,
            created_at: time(created)?,
            failed_attempts: failed.parse().map_err(|e| format!("bad failure count: {e}"))?,
            locked_until: match locked {
                "-" => None,
                t => Some(time(t)?),
            },
        })
    }
}
