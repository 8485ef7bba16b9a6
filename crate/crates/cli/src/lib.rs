//! Service, recorder, and settings behind the `lapse` binary.

pub mod api;
pub mod recorder;
pub mod settings;
