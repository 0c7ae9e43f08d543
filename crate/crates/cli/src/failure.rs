use std::fmt;

/// Process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitKind {
    Usage = 1,
    Data = 2,
    Internal = 3,
}

/// An error tagged with the exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub kind: ExitKind,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn usage(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ExitKind::Usage,
            error: error.into(),
        }
    }

    pub fn data(error: impl Into<anyhow::Error>) -> Self {
        Self {
            kind: ExitKind::Data,
            error: error.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

/// Anything not classified explicitly is an internal error.
impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Self {
            kind: ExitKind::Internal,
            error: e.into(),
        }
    }
}

pub type CliResult<T> = Result<T, Failure>;

/// Attaches context and an exit class to a fallible result.
pub trait Classify<T> {
    fn usage_err(self, context: impl FnOnce() -> String) -> CliResult<T>;
    fn data_err(self, context: impl FnOnce() -> String) -> CliResult<T>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn usage_err(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| Failure::usage(e.into().context(context())))
    }

    fn data_err(self, context: impl FnOnce() -> String) -> CliResult<T> {
        self.map_err(|e| Failure::data(e.into().context(context())))
    }
}

/// Model errors split by cause: bad configuration is a usage error, bad
/// inputs a data error, numeric failures internal.
pub fn model_failure(e: ddkseg_core::models::ModelError, context: String) -> Failure {
    use ddkseg_core::models::ModelError as M;
    let kind = match &e {
        M::Config(_) => ExitKind::Usage,
        M::Nn(_) => ExitKind::Internal,
        _ => ExitKind::Data,
    };
    Failure {
        kind,
        error: anyhow::Error::new(e).context(context),
    }
}
