//! Session telemetry: validation, durable append-only storage, exclusion
//! policies, duration export and the HTTP service around them.

pub mod error;
pub mod export;
pub mod policy;
pub mod record;
pub mod server;
pub mod store;

pub use error::{Result, TelemetryError};
pub use export::{durations_csv, write_durations_csv, EXPORT_HEADER};
pub use policy::{apply_exclusions, ExclusionPolicy};
pub use record::{validate_payload, ClientEvent, SessionPayload, SessionRecord, Survey, SurveyItem, ValidationErrors};
pub use server::{ingest_session, router, serve, Ack, IngestError, ServiceConfig};
pub use store::{Appended, Store};
