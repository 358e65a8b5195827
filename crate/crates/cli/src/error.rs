use std::path::PathBuf;
use std::process::ExitCode;

use dehp_core::keyfile::KeyFileError;
use dehp_core::SchemeError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    KeyFile { path: PathBuf, source: KeyFileError },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    /// 2 bad input, 3 key constraints unsatisfied, 4 payload too large,
    /// 5 ciphertext does not decrypt under this key, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::KeyFile { .. } => 2,
            CliError::Io { .. } => 1,
            CliError::Scheme(e) => match e {
                SchemeError::InvalidSecurityParameter(_)
                | SchemeError::ParameterMismatch { .. }
                | SchemeError::MessageOutOfRange { .. }
                | SchemeError::InvalidNonce
                | SchemeError::InvalidKeyMaterial(_) => 2,
                SchemeError::ResamplingExhausted(_) => 3,
                SchemeError::PayloadTooLarge { .. } => 4,
                SchemeError::PlaintextOutOfRange | SchemeError::MalformedPlaintext => 5,
                SchemeError::NumTheory(_) => 1,
            },
        }
    }
}

impl From<CliError> for ExitCode {
    fn from(e: CliError) -> Self {
        ExitCode::from(e.exit_code())
    }
}
