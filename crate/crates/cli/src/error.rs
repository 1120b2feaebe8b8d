use motion_lingua::emitter::EmitError;
use motion_lingua::eval::EvalError;
use motion_lingua::Error;

/// Failure classes, each with its own exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Config(String),
    #[error("internal invariant violated: {0}")]
    Invariant(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Config(_) => 2,
            CliError::Invariant(_) => 3,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Input(format!("{}: {e}", path.display()))
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Config(_)
            | Error::Emit(EmitError::InvalidTemplate(_) | EmitError::UnknownStage(_))
            | Error::Eval(EvalError::InvalidSpec(_) | EvalError::InvalidFixedThreshold(_)) => CliError::Config(msg),
            Error::Eval(EvalError::LengthMismatch { .. }) => CliError::Invariant(msg),
            _ => CliError::Input(msg),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use motion_lingua::{ConfigError, TokenizerError};

    #[test]
    fn exit_codes() {
        assert_eq!(
            CliError::from(Error::Tokenizer(TokenizerError::EmptyDataset)).exit_code(),
            1
        );
        assert_eq!(CliError::from(Error::Config(ConfigError::InvalidBeta)).exit_code(), 2);
        let mismatch = Error::Eval(EvalError::LengthMismatch { pred: 1, truth: 2 });
        assert_eq!(CliError::from(mismatch).exit_code(), 3);
        assert_eq!(CliError::Invariant("x".into()).exit_code(), 3);
    }
}
