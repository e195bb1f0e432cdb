//! Blocking HTTP client for the login API.

use std::time::Duration;

use gridauth_core::protocol::{
    ClickRequest, ClickResponse, ErrorBody, LoginEndpoint, RegisterRequest, RegisterResponse, SessionCreated,
    SessionRequest, SessionStart, API_PREFIX,
};
use gridauth_core::KeyNumber;
use serde::de::DeserializeOwned;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("server answered {status}: {message}")]
    Status { status: u16, message: String },
}

pub struct HttpEndpoint {
    base: String,
    agent: ureq::Agent,
}

impl HttpEndpoint {
    pub fn new(base_url: &str) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(15)))
            .build()
            .into();
        Self { base: base_url.trim_end_matches('/').to_owned(), agent }
    }

    fn post<B: Serialize, T: DeserializeOwned>(&self, path: &str, body: &B) -> Result<(u16, Reply<T>), ClientError> {
        let url = format!("{}{API_PREFIX}{path}", self.base);
        let mut res = self.agent.post(&url).send_json(body).map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = res.status().as_u16();
        let text = res.body_mut().read_to_string().map_err(|e| ClientError::Transport(e.to_string()))?;
        let reply = if (200..300).contains(&status) {
            Reply::Ok(serde_json::from_str(&text).map_err(|e| ClientError::Transport(format!("bad response: {e}")))?)
        } else {
            Reply::Err(serde_json::from_str(&text).unwrap_or(ErrorBody { error: text, retry_after_seconds: None }))
        };
        Ok((status, reply))
    }

    pub fn register(&self, username: &str) -> Result<KeyNumber, ClientError> {
        let req = RegisterRequest { username: username.to_owned() };
        match self.post::<_, RegisterResponse>("/register", &req)? {
            (_, Reply::Ok(r)) => Ok(r.key),
            (status, Reply::Err(e)) => Err(ClientError::Status { status, message: e.error }),
        }
    }
}

enum Reply<T> {
    Ok(T),
    Err(ErrorBody),
}

impl LoginEndpoint for HttpEndpoint {
    type Error = ClientError;

    fn start_session(&mut self, username: &str) -> Result<SessionStart, ClientError> {
        let req = SessionRequest { username: username.to_owned() };
        match self.post::<_, SessionCreated>("/sessions", &req)? {
            (_, Reply::Ok(created)) => Ok(SessionStart::Started(created)),
            (423, Reply::Err(e)) => Ok(SessionStart::Locked { retry_after_secs: e.retry_after_seconds.unwrap_or(0) }),
            (status, Reply::Err(e)) => Err(ClientError::Status { status, message: e.error }),
        }
    }

    fn click(&mut self, session_id: &str, row: i64, col: i64) -> Result<ClickResponse, ClientError> {
        match self.post::<_, ClickResponse>(&format!("/sessions/{session_id}/clicks"), &ClickRequest { row, col })? {
            (_, Reply::Ok(r)) => Ok(r),
            (status, Reply::Err(e)) => Err(ClientError::Status { status, message: e.error }),
        }
    }
}
