//! Exit statuses. Each workflow stage fails with its own code.

use std::fmt;
use std::process::ExitCode;

use rndcnn::Error;

pub const OK: u8 = 0;
/// I/O failure outside dataset ingest, or an internal error.
pub const IO: u8 = 1;
/// Bad command line (reported by the argument parser).
pub const USAGE: u8 = 2;
pub const CONFIG: u8 = 3;
/// Dataset, image, cache or checkpoint could not be read or decoded.
pub const INGEST: u8 = 4;
/// Training hit a NaN or infinity.
pub const NUMERIC: u8 = 5;
/// Gradient check failed.
pub const VERIFICATION: u8 = 6;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(CONFIG, message)
    }

    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(self.code)
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) => CONFIG,
            Error::Ingest(_)
            | Error::Decode { .. }
            | Error::Format { .. }
            | Error::Split(_)
            | Error::DegenerateClass { .. } => INGEST,
            Error::NonFinite(_) => NUMERIC,
            _ => IO,
        };
        Self::new(code, e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::new(IO, e.to_string())
    }
}
