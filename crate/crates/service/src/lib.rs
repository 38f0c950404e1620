//! HTTP service and command-line driver over the `rfc_core` pipeline.

pub mod api;
pub mod cli;
pub mod server;
pub mod snapshot;

pub use api::{handle_health, handle_related, ApiError, RfcRequest, RfcResponse};
pub use server::{router, AppState};
pub use snapshot::{Snapshot, SnapshotPaths};
