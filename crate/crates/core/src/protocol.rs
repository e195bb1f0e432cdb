//! JSON wire types shared by the HTTP service and its clients, plus a
//! transport-neutral login driver.

use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, GridLayout};
use crate::key::{KeyNumber, KEY_DIGITS};

pub const API_PREFIX: &str = "/api/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    InProgress,
    Succeeded,
    Failed,
    Expired,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        self != SessionStatus::InProgress
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterRequest {
    pub username: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegisterResponse {
    pub key: KeyNumber,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionRequest {
    pub username: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub layout: GridLayout,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ClickRequest {
    pub row: i64,
    pub col: i64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClickResponse {
    pub entered: usize,
    pub status: SessionStatus,
    pub layout: Option<GridLayout>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionView {
    pub status: SessionStatus,
    pub entered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retry_after_seconds: Option<u64>,
}

/// Result of asking for a login session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SessionStart {
    Started(SessionCreated),
    Locked { retry_after_secs: u64 },
}

/// Anything that speaks the login protocol: the in-process service or a
/// remote one over HTTP.
pub trait LoginEndpoint {
    type Error: std::error::Error + Send + Sync + 'static;

    fn start_session(&mut self, username: &str) -> Result<SessionStart, Self::Error>;

    fn click(&mut self, session_id: &str, row: i64, col: i64) -> Result<ClickResponse, Self::Error>;

    /// Lets `duration` of model time pass. Returns `false` if this endpoint
    /// cannot move time forward.
    fn wait(&mut self, duration: Duration) -> Result<bool, Self::Error> {
        let _ = duration;
        Ok(false)
    }
}

#[derive(Debug, Error)]
pub enum EntryError<E: std::error::Error + 'static> {
    #[error(transparent)]
    Endpoint(E),
    #[error("protocol violation: {0}")]
    Protocol(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoginOutcome {
    Succeeded,
    Failed,
    Locked { retry_after_secs: u64 },
}

/// The cell a scripted client clicks for `digit`: the first match in
/// row-major order.
pub fn choose_cell(layout: &GridLayout, digit: u8) -> Option<Cell> {
    layout.cells_for_digit(digit).first().copied()
}

/// Clicks the digits of `key` into an open session and returns the final
/// status reported by the endpoint.
pub fn enter_key_in_session<E: LoginEndpoint>(
    endpoint: &mut E,
    session: SessionCreated,
    key: KeyNumber,
) -> Result<SessionStatus, EntryError<E::Error>> {
    let mut layout = session.layout;
    for (i, digit) in key.digits().into_iter().enumerate() {
        let cell =
            choose_cell(&layout, digit).ok_or_else(|| EntryError::Protocol(format!("no cell enters digit {digit}")))?;
        let reply =
            endpoint.click(&session.session_id, cell.row as i64, cell.col as i64).map_err(EntryError::Endpoint)?;
        if reply.entered != i + 1 {
            return Err(EntryError::Protocol(format!("expected {} entries, server reports {}", i + 1, reply.entered)));
        }
        if i + 1 == KEY_DIGITS {
            return Ok(reply.status);
        }
        if reply.status != SessionStatus::InProgress {
            return Ok(reply.status);
        }
        layout = reply.layout.ok_or_else(|| EntryError::Protocol("in-progress reply without a layout".into()))?;
    }
    unreachable!("a key has exactly four digits")
}

/// Full headless login: open a session and enter `key`.
pub fn enter_key<E: LoginEndpoint>(
    endpoint: &mut E,
    username: &str,
    key: KeyNumber,
) -> Result<LoginOutcome, EntryError<E::Error>> {
    let session = match endpoint.start_session(username).map_err(EntryError::Endpoint)? {
        SessionStart::Started(s) => s,
        SessionStart::Locked { retry_after_secs } => return Ok(LoginOutcome::Locked { retry_after_secs }),
    };
    match enter_key_in_session(endpoint, session, key)? {
        SessionStatus::Succeeded => Ok(LoginOutcome::Succeeded),
        SessionStatus::Failed => Ok(LoginOutcome::Failed),
        other => Err(EntryError::Protocol(format!("session ended as {other:?}"))),
    }
}
