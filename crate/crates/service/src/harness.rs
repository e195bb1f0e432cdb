//! In-process endpoint with a mock clock, for tests and simulations.

use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use gridauth_core::accounts::{AccountStore, LockoutPolicy, StoreKey};
use gridauth_core::protocol::{ClickResponse, LoginEndpoint, SessionStart};
use gridauth_core::{Entropy, MockClock};
use rand::SeedableRng;

use crate::engine::{AuthService, ServiceConfig, ServiceError};

/// Builds a service over an in-memory store driven by `clock`.
pub fn in_memory_service(
    policy: LockoutPolicy,
    config: ServiceConfig,
    clock: &MockClock,
    seed: u64,
) -> Arc<AuthService> {
    let mut rng = Entropy::seed_from_u64(seed);
    let store = AccountStore::in_memory(&StoreKey::generate(&mut rng), policy);
    Arc::new(AuthService::new(Arc::new(store), Arc::new(clock.clone()), config, rng))
}

#[derive(Debug, Clone)]
pub struct InProcessEndpoint {
    service: Arc<AuthService>,
    clock: MockClock,
}

impl InProcessEndpoint {
    pub fn new(service: Arc<AuthService>, clock: MockClock) -> Self {
        Self { service, clock }
    }

    /// Fresh service with its own mock clock starting at `start`.
    pub fn fresh(policy: LockoutPolicy, config: ServiceConfig, start: DateTime<Utc>, seed: u64) -> Self {
        let clock = MockClock::new(start);
        let service = in_memory_service(policy, config, &clock, seed);
        Self { service, clock }
    }

    pub fn service(&self) -> &Arc<AuthService> {
        &self.service
    }

    pub fn clock(&self) -> &MockClock {
        &self.clock
    }
}

impl LoginEndpoint for InProcessEndpoint {
    type Error = ServiceError;

    fn start_session(&mut self, username: &str) -> Result<SessionStart, ServiceError> {
        match self.service.start_session(username) {
            Ok(s) => Ok(SessionStart::Started(s)),
            Err(ServiceError::Locked { retry_after_secs }) => Ok(SessionStart::Locked { retry_after_secs }),
            Err(e) => Err(e),
        }
    }

    fn click(&mut self, session_id: &str, row: i64, col: i64) -> Result<ClickResponse, ServiceError> {
        self.service.click(session_id, row, col)
    }

    fn wait(&mut self, duration: Duration) -> Result<bool, ServiceError> {
        let d = chrono::Duration::from_std(duration).map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.clock.advance(d);
        Ok(true)
    }
}
