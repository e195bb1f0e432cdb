//! Login service for image-grid key entry.
//!
//! [`AuthService`] holds the session state machine and is transport
//! independent; [`http::router`] exposes it as JSON over HTTP and
//! [`harness::InProcessEndpoint`] drives it directly under a mock clock.

pub mod engine;
pub mod harness;
pub mod http;

pub use engine::{AuthService, ServiceConfig, ServiceError};
pub use harness::{in_memory_service, InProcessEndpoint};
pub use http::{router, serve};
