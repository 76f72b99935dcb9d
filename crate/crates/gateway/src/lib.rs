//! Command-line pipeline and HTTP service around the `geobehave` engine.

pub mod cli;
pub mod config;
pub mod pipeline;
pub mod server;

/// A request the user can fix: bad flags, config, or input files.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
pub struct UsageError(pub String);

pub const EXIT_OK: u8 = 0;
pub const EXIT_RUNTIME: u8 = 1;
pub const EXIT_VALIDATION: u8 = 2;

/// Map an error chain to a process exit status: problems with the inputs
/// give 2, everything else 1.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<UsageError>().is_some() {
            return EXIT_VALIDATION;
        }
        if let Some(e) = cause.downcast_ref::<geobehave::Error>() {
            return match e {
                geobehave::Error::Io(io) if io.kind() == std::io::ErrorKind::NotFound => EXIT_VALIDATION,
                e if e.is_validation() => EXIT_VALIDATION,
                _ => EXIT_RUNTIME,
            };
        }
        if let Some(io) = cause.downcast_ref::<std::io::Error>() {
            // a missing input is a configuration problem
            return if io.kind() == std::io::ErrorKind::NotFound { EXIT_VALIDATION } else { EXIT_RUNTIME };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_VALIDATION;
        }
    }
    EXIT_RUNTIME
}
