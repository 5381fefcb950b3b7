use std::fmt::Display;
use std::process::ExitCode;

/// Why a command stopped. Bad input of any kind maps to exit code 2,
/// trouble reading or writing files to exit code 1.
#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Io(anyhow::Error),
}

impl Failure {
    pub fn invalid(msg: impl Display) -> Self {
        Failure::Invalid(anyhow::anyhow!("{msg}"))
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            Failure::Invalid(_) => ExitCode::from(2),
            Failure::Io(_) => ExitCode::from(1),
        }
    }
}

impl Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Invalid(e) | Failure::Io(e) => write!(f, "{e:#}"),
        }
    }
}

pub type Outcome<T> = Result<T, Failure>;

pub trait ResultExt<T> {
    fn or_invalid(self, what: impl Display) -> Outcome<T>;
    fn or_io(self, what: impl Display) -> Outcome<T>;
}

impl<T, E> ResultExt<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn or_invalid(self, what: impl Display) -> Outcome<T> {
        self.map_err(|e| Failure::Invalid(e.into().context(what.to_string())))
    }

    fn or_io(self, what: impl Display) -> Outcome<T> {
        self.map_err(|e| Failure::Io(e.into().context(what.to_string())))
    }
}
