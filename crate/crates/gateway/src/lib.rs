//! REST gateway over the materials toolkit and agent.

pub mod app;
pub mod bucket;
pub mod cache;
pub mod config;
pub mod error;
pub mod jobs;
pub mod keys;
pub mod openapi;

pub use app::{app, backend_from_config, build_state, router, AppState, CHAT_ROUTE, TOOL_ROUTES};
pub use config::GatewayConfig;
pub use error::{ApiError, ErrorBody};
