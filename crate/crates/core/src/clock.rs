//! Time sources and the server calendar.

use std::sync::Arc;

use chrono::{DateTime, Datelike, Duration, Utc};
use chrono_tz::Tz;
use parking_lot::Mutex;

use crate::key::DayOfMonth;

pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Manually driven clock for tests and model-time simulation. Clones share
/// the same instant.
#[derive(Debug, Clone)]
pub struct MockClock {
    now: Arc<Mutex<DateTime<Utc>>>,
}

impl MockClock {
    pub fn new(start: DateTime<Utc>) -> Self {
        Self { now: Arc::new(Mutex::new(start)) }
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock() += by;
    }

    pub fn set(&self, to: DateTime<Utc>) {
        *self.now.lock() = to;
    }
}

impl Clock for MockClock {
    fn now(&self) -> DateTime<Utc> {
        *self.now.lock()
    }
}

/// Maps instants to the calendar day in one configured timezone.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServerCalendar {
    tz: Tz,
}

impl Default for ServerCalendar {
    fn default() -> Self {
        Self { tz: Tz::UTC }
    }
}

impl ServerCalendar {
    pub fn new(tz: Tz) -> Self {
        Self { tz }
    }

    /// Parses an IANA timezone name such as `UTC` or `Asia/Dhaka`.
    pub fn from_name(name: &str) -> Result<Self, String> {
        name.parse::<Tz>().map(Self::new).map_err(|e| e.to_string())
    }

    pub fn timezone(&self) -> Tz {
        self.tz
    }

    pub fn day_of(&self, instant: DateTime<Utc>) -> DayOfMonth {
        DayOfMonth::new(instant.with_timezone(&self.tz).day()).expect("calendar day is always within 1..=31")
    }
}
