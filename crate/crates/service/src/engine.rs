//! Login session state machine.
//!
//! A session starts with a fresh layout, accepts exactly four entries and
//! ends as `succeeded`, `failed` or `expired`; all three are final. Each click
//! is resolved against the layout that was on screen, then the layout is
//! replaced. Header-row clicks are refused without using up an entry. Garbage
//! clicks do use one up and make the final check fail, so a watcher cannot
//! tell which click was wrong.

use std::collections::HashMap;
use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use gridauth_core::accounts::{AccountStore, LockState, LoginVerdict, StoreError, Username};
use gridauth_core::grid::{self, Cell, ClickResult, GridLayout};
use gridauth_core::key::{KeyNumber, KEY_DIGITS};
use gridauth_core::protocol::{ClickResponse, SessionCreated, SessionStatus, SessionView};
use gridauth_core::{Clock, Entropy, ServerCalendar};
use parking_lot::{Mutex, RwLock};
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ServiceConfig {
    pub session_ttl: Duration,
    pub calendar: ServerCalendar,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self { session_ttl: Duration::seconds(120), calendar: ServerCalendar::default() }
    }
}

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{0}")]
    Conflict(String),
    #[error("unknown session")]
    NotFound,
    #[error("session expired")]
    Expired,
    #[error("account locked")]
    Locked { retry_after_secs: u64 },
    #[error("internal error: {0}")]
    Internal(String),
}

impl From<StoreError> for ServiceError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::Validation(v) => ServiceError::BadRequest(v.to_string()),
            StoreError::Conflict => ServiceError::Conflict("username already registered".into()),
            other => ServiceError::Internal(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Entry {
    Digit(u8),
    Garbage,
}

#[derive(Debug, Clone)]
enum Subject {
    Known(Username),
    /// Unknown username; looks like a normal session and never verifies.
    Decoy,
}

#[derive(Debug)]
struct LoginSession {
    subject: Subject,
    entries: Vec<Entry>,
    layout: Option<GridLayout>,
    status: SessionStatus,
    expires_at: DateTime<Utc>,
}

impl LoginSession {
    fn refresh(&mut self, now: DateTime<Utc>) {
        if self.status == SessionStatus::InProgress && now >= self.expires_at {
            self.status = SessionStatus::Expired;
            self.layout = None;
        }
    }

    fn view(&self) -> SessionView {
        SessionView { status: self.status, entered: self.entries.len() }
    }

    fn entered_key(&self) -> Option<KeyNumber> {
        let mut digits = [0u8; KEY_DIGITS];
        for (slot, e) in digits.iter_mut().zip(&self.entries) {
            match *e {
                Entry::Digit(d) => *slot = d,
                Entry::Garbage => return None,
            }
        }
        KeyNumber::from_digits(digits).ok()
    }
}

pub struct AuthService {
    store: Arc<AccountStore>,
    clock: Arc<dyn Clock>,
    config: ServiceConfig,
    rng: Mutex<Entropy>,
    sessions: RwLock<HashMap<String, Arc<Mutex<LoginSession>>>>,
}

impl std::fmt::Debug for AuthService {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("AuthService")
            .field("config", &self.config)
            .field("sessions", &self.sessions.read().len())
            .finish_non_exhaustive()
    }
}

impl AuthService {
    pub fn new(store: Arc<AccountStore>, clock: Arc<dyn Clock>, config: ServiceConfig, rng: Entropy) -> Self {
        Self { store, clock, config, rng: Mutex::new(rng), sessions: RwLock::new(HashMap::new()) }
    }

    pub fn store(&self) -> &Arc<AccountStore> {
        &self.store
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    pub fn register(&self, raw_username: &str) -> Result<KeyNumber, ServiceError> {
        let username = Username::parse(raw_username).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let now = self.clock.now();
        let key = self.store.register(&username, now, &mut *self.rng.lock())?;
        tracing::info!("registered a new account");
        Ok(key)
    }

    pub fn start_session(&self, raw_username: &str) -> Result<SessionCreated, ServiceError> {
        let username = Username::parse(raw_username).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let now = self.clock.now();
        let subject = match self.store.lookup(&username) {
            Some(record) => match record.lock_state(now) {
                LockState::Locked { .. } => {
                    let retry_after_secs = record.lock_state(now).retry_after_secs(now);
                    return Err(ServiceError::Locked { retry_after_secs });
                }
                LockState::Unlocked => Subject::Known(username),
            },
            None => Subject::Decoy,
        };

        let (session_id, layout) = {
            let mut rng = self.rng.lock();
            let id: [u8; 16] = rng.random();
            (hex::encode(id), grid::generate_layout(&mut *rng))
        };
        let session = LoginSession {
            subject,
            entries: Vec::with_capacity(KEY_DIGITS),
            layout: Some(layout.clone()),
            status: SessionStatus::InProgress,
            expires_at: now + self.config.session_ttl,
        };

        let mut sessions = self.sessions.write();
        // Finished and expired sessions stay queryable for one more TTL.
        let horizon = now - self.config.session_ttl;
        sessions.retain(|_, s| s.lock().expires_at > horizon);
        sessions.insert(session_id.clone(), Arc::new(Mutex::new(session)));
        Ok(SessionCreated { session_id, layout })
    }

    pub fn click(&self, session_id: &str, row: i64, col: i64) -> Result<ClickResponse, ServiceError> {
        let handle = self.sessions.read().get(session_id).cloned().ok_or(ServiceError::NotFound)?;
        let mut session = handle.lock();
        let now = self.clock.now();
        session.refresh(now);
        match session.status {
            SessionStatus::InProgress => {}
            SessionStatus::Expired => return Err(ServiceError::Expired),
            SessionStatus::Succeeded | SessionStatus::Failed => {
                return Err(ServiceError::Conflict("session already finished".into()))
            }
        }

        let cell = Cell::new(row, col).map_err(|e| ServiceError::BadRequest(e.to_string()))?;
        let layout = session.layout.as_ref().expect("in-progress sessions hold a layout");
        let entry = match grid::resolve_cell(layout, cell) {
            ClickResult::HeaderCell => return Err(ServiceError::BadRequest("the header row is not clickable".into())),
            ClickResult::Digit(d) => Entry::Digit(d),
            ClickResult::Garbage => Entry::Garbage,
        };
        session.entries.push(entry);

        if session.entries.len() < KEY_DIGITS {
            let next = grid::reshuffle_after_click(&mut *self.rng.lock());
            session.layout = Some(next.clone());
            return Ok(ClickResponse {
                entered: session.entries.len(),
                status: SessionStatus::InProgress,
                layout: Some(next),
            });
        }

        session.layout = None;
        let accepted = self.verify(&session, now)?;
        session.status = if accepted { SessionStatus::Succeeded } else { SessionStatus::Failed };
        Ok(ClickResponse { entered: session.entries.len(), status: session.status, layout: None })
    }

    fn verify(&self, session: &LoginSession, now: DateTime<Utc>) -> Result<bool, ServiceError> {
        let day = self.config.calendar.day_of(now);
        let entered = session.entered_key();
        match &session.subject {
            Subject::Decoy => Ok(self.store.decoy_attempt(entered, day)),
            Subject::Known(username) => match self.store.attempt_login(username, entered, day, now)? {
                LoginVerdict::Accepted => Ok(true),
                LoginVerdict::Rejected { lock } => {
                    if matches!(lock, LockState::Locked { .. }) {
                        tracing::warn!("account locked after repeated failures");
                    }
                    Ok(false)
                }
                LoginVerdict::Locked { .. } => Ok(false),
            },
        }
    }

    pub fn session_view(&self, session_id: &str) -> Result<SessionView, ServiceError> {
        let handle = self.sessions.read().get(session_id).cloned().ok_or(ServiceError::NotFound)?;
        let mut session = handle.lock();
        session.refresh(self.clock.now());
        Ok(session.view())
    }
}
