//! Failure classes, exit codes and the machine-readable error record.

use serde::Serialize;
use serde_json::Value;
use tdflow::gsn::GsnError;
use tdflow::ingest::IngestError;
use tdflow::nrsolve::SolveError;
use thiserror::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NOT_CONVERGED: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad files, arguments or network data.
    #[error("{0}")]
    Input(String),
    #[error("{message}")]
    NotConverged {
        message: String,
        /// Solver report at the point of failure, when there is one.
        report: Option<Value>,
    },
    #[error("{0}")]
    Internal(String),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    schema: u32,
    status: &'static str,
    exit_code: i32,
    kind: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    report: Option<&'a Value>,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError::Input(message.into())
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError::Internal(message.into())
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::NotConverged { .. } => EXIT_NOT_CONVERGED,
            CliError::Internal(_) => EXIT_INTERNAL,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input(_) => "input",
            CliError::NotConverged { .. } => "not_converged",
            CliError::Internal(_) => "internal",
        }
    }

    pub fn is_not_converged(&self) -> bool {
        matches!(self, CliError::NotConverged { .. })
    }

    pub fn record(&self) -> Value {
        let report = match self {
            CliError::NotConverged { report, .. } => report.as_ref(),
            _ => None,
        };
        serde_json::to_value(ErrorRecord {
            schema: 1,
            status: "error",
            exit_code: self.exit_code(),
            kind: self.kind(),
            message: self.to_string(),
            report,
        })
        .expect("error record serializes")
    }
}

impl From<IngestError> for CliError {
    fn from(e: IngestError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        match &e {
            SolveError::Invalid(_) | SolveError::Options(_) => CliError::Input(e.to_string()),
            SolveError::Unsolvable { report, .. } => CliError::NotConverged {
                message: e.to_string(),
                report: serde_json::to_value(report).ok(),
            },
            SolveError::Circuit(_) => CliError::Internal(e.to_string()),
        }
    }
}

impl From<GsnError> for CliError {
    fn from(e: GsnError) -> Self {
        match &e {
            GsnError::Invalid(_) | GsnError::Options(_) | GsnError::WeakCoupling(_) => CliError::Input(e.to_string()),
            GsnError::NotConverged { report, .. } => CliError::NotConverged {
                message: e.to_string(),
                report: serde_json::to_value(crate::output::strip_timings(report)).ok(),
            },
            GsnError::Subcircuit { source, .. } => CliError::NotConverged {
                message: e.to_string(),
                report: source.report().and_then(|r| serde_json::to_value(r).ok()),
            },
            GsnError::Circuit(_) | GsnError::Inconsistent(_) | GsnError::Io(_) => CliError::Internal(e.to_string()),
        }
    }
}

/// Errors writing outputs.
impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Internal(format!("I/O error: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Internal(format!("CSV error: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Internal(format!("JSON error: {e}"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_and_record() {
        let e = CliError::NotConverged {
            message: "nose".into(),
            report: Some(serde_json::json!({"iterations": 3})),
        };
        assert_eq!(e.exit_code(), 3);
        let r = e.record();
        assert_eq!(r["kind"], "not_converged");
        assert_eq!(r["report"]["iterations"], 3);
        assert_eq!(CliError::input("x").exit_code(), 2);
        assert!(CliError::internal("x").record().get("report").is_none());
    }
}
