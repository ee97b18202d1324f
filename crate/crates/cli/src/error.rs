use fairbayes::FairError;
use serde_json::json;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Data(String),

    #[error("{0}")]
    Infeasible(String),

    #[error("{0}")]
    OracleFailed(String),

    #[error(transparent)]
    Core(#[from] FairError),
}

impl CliError {
    /// 1 usage or configuration, 2 data, 3 no feasible multiplier, 4 failed oracle check.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Data(_) => 2,
            CliError::Infeasible(_) | CliError::Core(FairError::Infeasible(_)) => 3,
            CliError::OracleFailed(_) => 4,
            CliError::Core(_) => 2,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self.exit_code() {
            1 => "config",
            3 => "infeasible",
            4 => "oracle",
            _ => "data",
        }
    }

    /// Structured record written to stderr.
    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "error": {
                "kind": self.kind(),
                "message": self.to_string(),
                "exit_code": self.exit_code(),
            }
        })
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(CliError::Config("x".into()).exit_code(), 1);
        assert_eq!(CliError::Data("x".into()).exit_code(), 2);
        assert_eq!(CliError::Core(FairError::Infeasible("x".into())).exit_code(), 3);
        assert_eq!(CliError::Core(FairError::Domain("x".into())).exit_code(), 2);
        assert_eq!(CliError::OracleFailed("x".into()).to_json()["error"]["exit_code"], 4);
    }
}
