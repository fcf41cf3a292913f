use std::fmt;
use std::path::Path;

use disag_core::Error as CoreError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Numeric,
}

impl Kind {
    pub fn exit_code(self) -> i32 {
        match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Numeric => 4,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Config, message: message.into() }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError { kind: Kind::Data, message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        CliError::data(format!("{}: {err}", path.display()))
    }

    pub fn context(mut self, what: impl fmt::Display) -> Self {
        self.message = format!("{what}: {}", self.message);
        self
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let kind = if e.is_numeric() {
            Kind::Numeric
        } else if e.is_config() || matches!(e, CoreError::Domain(_)) {
            Kind::Config
        } else {
            Kind::Data
        };
        CliError { kind, message: e.to_string() }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::data(e.to_string())
    }
}

/// Tags a core error raised while interpreting the config file.
pub fn in_config(e: CoreError) -> CliError {
    let mut c = CliError::from(e);
    if c.kind == Kind::Data {
        c.kind = Kind::Config;
    }
    c
}
