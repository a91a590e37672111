//! The `scholarchat` command line and HTTP service.

pub mod cli;
pub mod client;
pub mod config;
pub mod error;
pub mod server;

pub use config::AppConfig;
pub use error::AppError;
