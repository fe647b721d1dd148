//! HTTP API, CLI and living-update orchestration over the evidesk engine.

pub mod api;
pub mod cli;
pub mod config;
pub mod engine;
pub mod error;
pub mod graphq;
pub mod ops;
